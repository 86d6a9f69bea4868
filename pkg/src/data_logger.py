import json
import datetime
import os
import threading

import pandas as pd

import config


class DataLogger:
    def __init__(self, filepath=config.RUN_LOG):
        self.filepath = filepath
        self.lock = threading.Lock()

    def log(self, event_data: dict):
        """
        Thread-safe appending of event data to JSONL file.
        """
        if "timestamp" not in event_data:
            # Use local time with timezone information
            event_data["timestamp"] = datetime.datetime.now().astimezone().isoformat(timespec='seconds')

        with self.lock:
            with open(self.filepath, "a", encoding="utf-8") as f:
                json_line = json.dumps(event_data, default=str)
                f.write(json_line + "\n")


class CheckpointLog:
    """
    Append-only CSV of finished sweep members: member_id,weights,ratio.
    Weights are ';'-joined so each member stays on one row.
    """

    COLUMNS = ["member_id", "weights", "ratio"]

    def __init__(self, filepath):
        self.filepath = str(filepath)
        self.lock = threading.Lock()

    def completed(self):
        """{member_id: ratio} for every member already on disk."""
        if not os.path.exists(self.filepath) or os.path.getsize(self.filepath) == 0:
            return {}
        done = pd.read_csv(self.filepath)
        missing = set(self.COLUMNS) - set(done.columns)
        if missing:
            raise ValueError(f"checkpoint {self.filepath} lacks columns {sorted(missing)}")
        return dict(zip(done["member_id"].astype(int), done["ratio"].astype(float)))

    def append(self, member_id, weights, ratio):
        row = pd.DataFrame([{
            "member_id": int(member_id),
            "weights": ";".join(format(w, ".17g") for w in weights),
            "ratio": ratio,
        }], columns=self.COLUMNS)
        with self.lock:
            fresh = not os.path.exists(self.filepath) or os.path.getsize(self.filepath) == 0
            row.to_csv(self.filepath, mode="a", header=fresh, index=False, float_format=config.FLOAT_FORMAT)

import json
import logging
import os
from enum import Enum

import numpy as np
import pandas as pd

from exceptions import DatasetError
from hypergraph import Hypergraph

FEATURES_FILE = "features.csv"
HYPEREDGES_FILE = "hyperedges.txt"
LABELS_FILE = "labels.csv"
WEIGHTS_FILE = "weights.csv"


class DatasetFormat(str, Enum):
    JSON = "json"
    TWO_FILE = "two-file"


def _as_node_id(value, edge_index):
    """Accept integral node ids only; ids are never remapped"""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise DatasetError(f"Hyperedge {edge_index} has non-integer node id {value!r}")
    return int(value)


class DatasetHandler:
    """Read and write hypergraph datasets in the JSON and two-file formats"""

    def __init__(self, logger=None):
        """Initialize with optional logger"""
        self.logger = logger or logging.getLogger('SEHSSL')
        self.current_file = None

    def load(self, path, fmt=None):
        """Load a hypergraph, detecting the format from the path when not given"""
        if not os.path.exists(path):
            self.logger.error(f"Dataset not found: {path}")
            raise DatasetError(f"Dataset not found: {path}")

        if fmt is None:
            fmt = DatasetFormat.TWO_FILE if os.path.isdir(path) else DatasetFormat.JSON
        try:
            fmt = DatasetFormat(fmt)
        except ValueError:
            raise DatasetError(f"Unknown dataset format: {fmt}") from None

        self.logger.info(f"Loading {fmt.value} dataset: {path}")
        try:
            if fmt is DatasetFormat.JSON:
                h = self._load_json(path)
            else:
                h = self._load_two_file(path)
        except DatasetError as e:
            self.logger.error(f"Failed to load dataset {path}: {e}")
            raise

        self.current_file = path
        self.logger.info(f"Dataset loaded: {h.num_nodes} nodes, {h.num_hyperedges} hyperedges, "
                         f"{h.num_features} features, {h.num_classes} classes")
        return h

    def _load_json(self, path):
        """Parse the JSON dataset document"""
        try:
            with open(path, "r", encoding="utf-8") as f:
                doc = json.load(f)
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DatasetError(f"Cannot parse {path}: {e}") from e

        if not isinstance(doc, dict):
            raise DatasetError("Dataset document must be a JSON object")
        missing = [key for key in ("num_nodes", "features", "hyperedges") if key not in doc]
        if missing:
            raise DatasetError(f"Dataset is missing keys: {', '.join(missing)}")

        num_nodes = doc["num_nodes"]
        if isinstance(num_nodes, bool) or not isinstance(num_nodes, int):
            raise DatasetError(f"num_nodes must be an integer, got {num_nodes!r}")
        if not isinstance(doc["hyperedges"], list):
            raise DatasetError("hyperedges must be an array of arrays")

        hyperedges = []
        for j, edge in enumerate(doc["hyperedges"]):
            if not isinstance(edge, list):
                raise DatasetError(f"Hyperedge {j} is not an array")
            hyperedges.append([_as_node_id(v, j) for v in edge])

        try:
            features = np.asarray(doc["features"], dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise DatasetError(f"Feature matrix is not numeric: {e}") from e
        if features.ndim != 2:
            raise DatasetError("features must be an array of equal-length numeric arrays")

        return Hypergraph(num_nodes, hyperedges, features,
                          weights=doc.get("weights"),
                          labels=doc.get("labels"),
                          num_classes=doc.get("num_classes"))

    def _load_two_file(self, directory):
        """Parse features.csv + hyperedges.txt (+ optional labels.csv, weights.csv)"""
        features_path = os.path.join(directory, FEATURES_FILE)
        edges_path = os.path.join(directory, HYPEREDGES_FILE)
        for required in (features_path, edges_path):
            if not os.path.isfile(required):
                raise DatasetError(f"Two-file dataset is missing {required}")

        try:
            features = pd.read_csv(features_path, header=None, dtype=np.float64,
                                   float_precision="round_trip").to_numpy()
        except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DatasetError(f"Cannot parse {features_path}: {e}") from e

        hyperedges = []
        with open(edges_path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                tokens = line.split()
                if not tokens:
                    raise DatasetError(f"{edges_path}:{line_no}: empty hyperedge")
                try:
                    hyperedges.append([int(tok) for tok in tokens])
                except ValueError:
                    raise DatasetError(f"{edges_path}:{line_no}: non-integer node id") from None

        labels = self._read_column(os.path.join(directory, LABELS_FILE), np.int64)
        weights = self._read_column(os.path.join(directory, WEIGHTS_FILE), np.float64)
        return Hypergraph(features.shape[0], hyperedges, features, weights=weights, labels=labels)

    @staticmethod
    def _read_column(path, dtype):
        """Read an optional single-column CSV, returning None when absent"""
        if not os.path.isfile(path):
            return None
        try:
            frame = pd.read_csv(path, header=None, float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DatasetError(f"Cannot parse {path}: {e}") from e
        if frame.shape[1] != 1:
            raise DatasetError(f"{path} must have exactly one column")
        try:
            return frame.iloc[:, 0].to_numpy(dtype=dtype)
        except (TypeError, ValueError) as e:
            raise DatasetError(f"{path} has non-numeric entries: {e}") from e

    def save_json(self, h, path):
        """Write the hypergraph as a JSON dataset document"""
        doc = {
            "num_nodes": h.num_nodes,
            "features": h.features.tolist(),
            "hyperedges": [members.tolist() for members in h.edge_nodes],
            "weights": h.weights.tolist(),
        }
        if h.labels is not None:
            doc["labels"] = h.labels.tolist()
            doc["num_classes"] = h.num_classes
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f)
        self.logger.info(f"Saved dataset to {path}")
        return path

    def save_two_file(self, h, directory):
        """Write the hypergraph in the two-file layout inside a directory"""
        os.makedirs(directory, exist_ok=True)
        pd.DataFrame(h.features).to_csv(
            os.path.join(directory, FEATURES_FILE), header=False, index=False, float_format="%.17g")
        with open(os.path.join(directory, HYPEREDGES_FILE), "w", encoding="utf-8") as f:
            for members in h.edge_nodes:
                f.write(" ".join(str(int(v)) for v in members) + "\n")
        pd.Series(h.weights).to_csv(
            os.path.join(directory, WEIGHTS_FILE), header=False, index=False, float_format="%.17g")
        if h.labels is not None:
            pd.Series(h.labels).to_csv(os.path.join(directory, LABELS_FILE), header=False, index=False)
        self.logger.info(f"Saved two-file dataset to {directory}")
        return directory


def load_hypergraph(path, fmt=None, logger=None):
    """Load a dataset file (json) or directory (two-file)"""
    return DatasetHandler(logger).load(path, fmt)


def save_hypergraph(h, path, logger=None):
    """Serialize a hypergraph as a JSON dataset document"""
    return DatasetHandler(logger).save_json(h, path)


def save_embeddings(matrix, path):
    """Write an embedding matrix as CSV: id column then one column per dimension"""
    matrix = np.asarray(matrix, dtype=np.float64)
    frame = pd.DataFrame(matrix, columns=[f"d{i}" for i in range(matrix.shape[1])])
    frame.insert(0, "id", np.arange(matrix.shape[0]))
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def load_embeddings(path):
    """Read an embedding CSV written by save_embeddings, rows ordered by id"""
    if not os.path.isfile(path):
        raise DatasetError(f"Embedding file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f"Cannot parse {path}: {e}") from e
    if "id" not in frame.columns:
        raise DatasetError(f"{path} has no id column")
    frame = frame.sort_values("id")
    ids = frame["id"].to_numpy()
    if not np.array_equal(ids, np.arange(ids.size)):
        raise DatasetError(f"{path} ids are not the dense range 0..{ids.size - 1}")
    return frame.drop(columns="id").to_numpy(dtype=np.float64)

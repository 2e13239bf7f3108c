"""File formats: complex matrix JSON and the count-record text format.

Matrix JSON: {"rows": int, "cols": int, "re": [row-major], "im": [row-major]};
readers reject length mismatches.

Counts: header line `#gbs-counts v1 detector=<threshold|pnr> modes=<M> cmax=<k>`,
then one record per line (threshold: M characters '0'/'1'; pnr: M
comma-separated decimal integers).
"""

import json

import numpy as np

from .errors import ConfigurationError
from .sampler import CountDataset

__all__ = ["save_matrix_json", "load_matrix_json", "save_counts", "load_counts"]

_HEADER_PREFIX = "#gbs-counts v1"


def save_matrix_json(path, matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    obj = {
        "rows": matrix.shape[0],
        "cols": matrix.shape[1],
        "re": matrix.real.ravel().tolist(),
        "im": matrix.imag.ravel().tolist(),
    }
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_matrix_json(path):
    with open(path) as fh:
        obj = json.load(fh)
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed matrix file {path}: {exc}") from exc
    if re.size != rows * cols or im.size != rows * cols:
        raise ConfigurationError(
            f"matrix file {path}: expected {rows * cols} entries, "
            f"got re={re.size}, im={im.size}"
        )
    return (re + 1j * im).reshape(rows, cols)


def save_counts(path, dataset):
    rec = dataset.records
    c_max = dataset.c_max if dataset.detector == "pnr" else 1
    header = (
        f"{_HEADER_PREFIX} detector={dataset.detector} modes={dataset.m} cmax={c_max}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode())
        if dataset.detector == "threshold":
            # digits + newline column, written as one buffer
            block = np.empty((rec.shape[0], rec.shape[1] + 1), dtype=np.uint8)
            block[:, :-1] = rec + ord("0")
            block[:, -1] = ord("\n")
            fh.write(block.tobytes())
        else:
            for row in rec:
                fh.write((",".join(map(str, row.tolist())) + "\n").encode())


def load_counts(path, provenance="experiment"):
    with open(path, "rb") as fh:
        header = fh.readline().decode().strip()
        body = fh.read()
    if not header.startswith(_HEADER_PREFIX):
        raise ConfigurationError(f"{path}: missing '{_HEADER_PREFIX}' header")
    fields = dict(
        part.split("=", 1) for part in header[len(_HEADER_PREFIX) :].split() if "=" in part
    )
    try:
        detector = fields["detector"]
        modes = int(fields["modes"])
        c_max = int(fields["cmax"])
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"{path}: malformed counts header: {exc}") from exc
    if detector == "threshold":
        raw = np.frombuffer(body, dtype=np.uint8)
        width = modes + 1  # newline-terminated rows
        if raw.size % width:
            raise ConfigurationError(f"{path}: record length does not match modes={modes}")
        grid = raw.reshape(-1, width)
        if np.any(grid[:, -1] != ord("\n")):
            raise ConfigurationError(f"{path}: malformed threshold record line")
        rec = grid[:, :-1] - ord("0")
        if rec.size and rec.max() > 1:
            raise ConfigurationError(f"{path}: threshold records must be 0/1")
        return CountDataset(rec, detector="threshold", provenance=provenance)
    if detector == "pnr":
        lines = body.decode().splitlines()
        rec = np.empty((len(lines), modes), dtype=np.int64)
        for i, line in enumerate(lines):
            parts = line.split(",")
            if len(parts) != modes:
                raise ConfigurationError(f"{path}: line {i + 2} has {len(parts)} fields")
            rec[i] = [int(p) for p in parts]
        return CountDataset(rec, detector="pnr", c_max=c_max, provenance=provenance)
    raise ConfigurationError(f"{path}: unknown detector {detector!r}")

"""Durable on-disk model store.

Layout of a saved model directory::

    <dir>/manifest.txt      UTF-8 key=value lines, checksums of every array
    <dir>/coeff_avg.f64     2 x w matrix: averaged mean / variance coefficients
    <dir>/raw_values.f64    retained raw steps (NaN where missing)
    <dir>/raw_mask.f64      observation mask for the raw window (0.0 / 1.0)
    <dir>/sub_<i>/          per trained sub-model:
        U.f64 S.f64 V.f64              mean-model factors
        Uf.f64 Sf.f64 Vf.f64           mean forecast factors
        Uv.f64 Sv.f64 Vv.f64           variance-model factors
        Uvf.f64 Svf.f64 Vvf.f64        variance forecast factors
        beta_mean.f64 beta_var.f64     regression coefficients
        last_row_mean.f64 last_row_var.f64
        buf.f64                        partial Page-column buffer

Every ``.f64`` file is two little-endian uint64 dimensions (rows, cols)
followed by rows*cols little-endian IEEE-754 float64 values in column-major
order.  Exact float state (running sums, gamma) is stored in the manifest as
hex floats, so a load reproduces predictions bit for bit.

Saves are staged in ``<dir>.staging`` and committed by renaming the old
directory to ``<dir>.bak`` and the staging directory to ``<dir>``; a load
falls back to the backup when the primary is missing or fails validation, so
an interrupted save always leaves the previous version loadable.
"""

import hashlib
import json
import os
import shutil

import numpy as np

from .errors import ChecksumMismatch, CorruptManifest, VersionUnsupported
from .incremental import (
    HyperParams,
    PredictionModel,
    SubModel,
    _RawWindow,
    retrain_thresholds,
)
from .svd_engine import TruncatedSVD

FORMAT_VERSION = 1

_SVD_FILES = {
    "mean_svd": ("U", "S", "V"),
    "fc_mean_svd": ("Uf", "Sf", "Vf"),
    "var_svd": ("Uv", "Sv", "Vv"),
    "fc_var_svd": ("Uvf", "Svf", "Vvf"),
}
_VEC_FILES = ("beta_mean", "beta_var", "last_row_mean", "last_row_var")


class PersistenceReadError(CorruptManifest):
    """Internal: manifest unreadable at one location (may fall back)."""


# Filesystem primitives routed through module functions so tests can inject
# faults at any point of the commit sequence.

def _write_bytes(path: str, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def _rename(src: str, dst: str) -> None:
    os.rename(src, dst)


def encode_f64(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"only 1-D/2-D arrays supported, got {arr.ndim}-D")
    header = np.array(arr.shape, dtype="<u8").tobytes()
    return header + np.asfortranarray(arr).astype("<f8").tobytes(order="F")


def decode_f64(data: bytes) -> np.ndarray:
    if len(data) < 16:
        raise CorruptManifest("array file shorter than its header")
    rows, cols = np.frombuffer(data[:16], dtype="<u8")
    rows, cols = int(rows), int(cols)
    expect = 16 + rows * cols * 8
    if len(data) != expect:
        raise CorruptManifest(
            f"array file has {len(data)} bytes, expected {expect}")
    flat = np.frombuffer(data[16:], dtype="<f8")
    return flat.reshape((rows, cols), order="F").copy()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _svd_arrays(svd: TruncatedSVD) -> dict[str, np.ndarray]:
    return {"U": svd.U, "S": svd.s, "V": svd.V}


def save_model(model: PredictionModel, directory) -> dict:
    """Persist the model, replacing any previous version atomically.

    Returns the manifest as a dict.  The previous version (if any) remains
    loadable if the process dies at any point during the save.
    """
    directory = os.fspath(directory)
    staging = directory + ".staging"
    backup = directory + ".bak"
    if os.path.exists(staging):
        shutil.rmtree(staging)
    os.makedirs(staging)

    prev_version = 0
    for candidate in (directory, backup):
        try:
            prev_version = max(prev_version,
                               int(_read_manifest(candidate)["model_version"]))
        except (PersistenceReadError, FileNotFoundError, OSError):
            pass

    manifest: dict[str, str] = {
        "format_version": str(FORMAT_VERSION),
        "model_version": str(prev_version + 1),
        "names": json.dumps(model.names),
        "n_series": str(model.N),
        "n_steps": str(model.n_steps),
        "t0": float(model.t0).hex(),
        "step": float(model.step).hex(),
        "obs_sum": float(model.obs_sum).hex(),
        "obs_sumsq": float(model.obs_sumsq).hex(),
        "obs_cnt": str(model.obs_cnt),
        "half_steps": str(model.half_steps),
        "hp.T0": str(model.hp.T0),
        "hp.Tprime": str(model.hp.Tprime),
        "hp.gamma": float(model.hp.gamma).hex(),
        "hp.L": json.dumps(model.hp.L),
        "hp.k1": json.dumps(model.hp.k1),
        "hp.k2": json.dumps(model.hp.k2),
        "hp.coeff_window": str(model.hp.coeff_window),
        "submodel_count": str(len(model.submodels)),
    }

    checksums: dict[str, str] = {}

    def emit(relpath: str, arr: np.ndarray) -> None:
        data = encode_f64(arr)
        full = os.path.join(staging, relpath)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        _write_bytes(full, data)
        checksums[relpath] = _sha256(data)

    raw_vals, raw_mask, raw_start = model.raw.state()
    manifest["raw_start"] = str(raw_start)
    emit("raw_values.f64", np.where(raw_mask, raw_vals, np.nan))
    emit("raw_mask.f64", raw_mask.astype(np.float64))

    for sm in model.submodels:
        pre = f"sub{sm.index}."
        manifest[pre + "start_step"] = str(sm.start_step)
        manifest[pre + "steps"] = str(sm.steps)
        manifest[pre + "trained"] = "1" if sm.trained else "0"
        manifest[pre + "pending"] = json.dumps(sm.pending)
        manifest[pre + "retrain_history"] = json.dumps(sm.retrain_history)
        if not sm.trained:
            continue
        manifest[pre + "L"] = str(sm.L)
        manifest[pre + "P"] = str(sm.P)
        manifest[pre + "P0"] = str(sm.P0)
        manifest[pre + "k1"] = str(sm.k1)
        manifest[pre + "k2"] = str(sm.k2)
        manifest[pre + "buf_len"] = str(sm.buf_len)
        sub = f"sub_{sm.index}"
        for attr, names in _SVD_FILES.items():
            svd = getattr(sm, attr)
            for fname, arr in zip(names, (svd.U, svd.s, svd.V)):
                emit(f"{sub}/{fname}.f64", arr)
        for attr in _VEC_FILES:
            emit(f"{sub}/{attr}.f64", getattr(sm, attr))
        emit(f"{sub}/buf.f64", sm.buf)

    if model.trained_submodels():
        bm, bv = model.averaged_coefficients()
        emit("coeff_avg.f64", np.vstack([bm, bv]))
    else:
        emit("coeff_avg.f64", np.zeros((2, 0)))

    for relpath, digest in checksums.items():
        manifest[f"checksum.{relpath}"] = digest
    lines = "".join(f"{k}={v}\n" for k, v in manifest.items())
    _write_bytes(os.path.join(staging, "manifest.txt"), lines.encode("utf-8"))

    # Commit: demote the live dir to backup, promote staging, drop backup.
    if os.path.exists(backup):
        shutil.rmtree(backup)
    if os.path.exists(directory):
        _rename(directory, backup)
    _rename(staging, directory)
    if os.path.exists(backup):
        shutil.rmtree(backup)
    return manifest


def _read_manifest(directory: str) -> dict[str, str]:
    path = os.path.join(directory, "manifest.txt")
    if not os.path.isfile(path):
        raise PersistenceReadError(f"no manifest at {path}")
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "=" not in line:
                raise PersistenceReadError(
                    f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            out[key] = value
    for key in ("format_version", "model_version", "n_series", "n_steps"):
        if key not in out:
            raise PersistenceReadError(f"{path}: missing key {key!r}")
    return out


def _load_array(directory: str, relpath: str, manifest: dict[str, str]) -> np.ndarray:
    digest = manifest.get(f"checksum.{relpath}")
    if digest is None:
        raise CorruptManifest(f"manifest lacks checksum for {relpath}")
    full = os.path.join(directory, relpath)
    try:
        with open(full, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ChecksumMismatch(f"cannot read {full}: {exc}") from exc
    if _sha256(data) != digest:
        raise ChecksumMismatch(f"checksum mismatch for {relpath}")
    return decode_f64(data)


def _vector(arr: np.ndarray) -> np.ndarray:
    return arr.reshape(-1).copy()


def _load_from(directory: str) -> PredictionModel:
    manifest = _read_manifest(directory)
    try:
        return _rebuild(directory, manifest)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CorruptManifest(f"{directory}: malformed manifest: {exc}") from exc


def _rebuild(directory: str, manifest: dict[str, str]) -> PredictionModel:
    version = int(manifest["format_version"])
    if version > FORMAT_VERSION:
        raise VersionUnsupported(
            f"store format {version} newer than supported {FORMAT_VERSION}")

    hp = HyperParams(
        T0=int(manifest["hp.T0"]),
        Tprime=int(manifest["hp.Tprime"]),
        gamma=float.fromhex(manifest["hp.gamma"]),
        L=json.loads(manifest["hp.L"]),
        k1=json.loads(manifest["hp.k1"]),
        k2=json.loads(manifest["hp.k2"]),
        coeff_window=int(manifest["hp.coeff_window"]),
    )
    names = json.loads(manifest["names"])
    model = PredictionModel(names, hp,
                            t0=float.fromhex(manifest["t0"]),
                            step=float.fromhex(manifest["step"]))
    model.n_steps = int(manifest["n_steps"])
    model.obs_sum = float.fromhex(manifest["obs_sum"])
    model.obs_sumsq = float.fromhex(manifest["obs_sumsq"])
    model.obs_cnt = int(manifest["obs_cnt"])
    model.half_steps = int(manifest["half_steps"])

    raw_vals = _load_array(directory, "raw_values.f64", manifest)
    raw_mask = _load_array(directory, "raw_mask.f64", manifest) > 0.5
    model.raw = _RawWindow.from_state(raw_vals, raw_mask,
                                      int(manifest["raw_start"]))

    count = int(manifest["submodel_count"])
    for i in range(count):
        pre = f"sub{i}."
        if pre + "start_step" not in manifest:
            raise CorruptManifest(f"manifest missing sub-model {i}")
        sm = SubModel(i, int(manifest[pre + "start_step"]), model.N,
                      retrain_thresholds(hp, first_segment=(i == 0)))
        sm.steps = int(manifest[pre + "steps"])
        sm.pending = list(json.loads(manifest[pre + "pending"]))
        sm.retrain_history = list(json.loads(manifest[pre + "retrain_history"]))
        if manifest[pre + "trained"] == "1":
            sm.L = int(manifest[pre + "L"])
            sm.P = int(manifest[pre + "P"])
            sm.P0 = int(manifest[pre + "P0"])
            sm.k1 = int(manifest[pre + "k1"])
            sm.k2 = int(manifest[pre + "k2"])
            sub = f"sub_{i}"
            for attr, fnames in _SVD_FILES.items():
                U = _load_array(directory, f"{sub}/{fnames[0]}.f64", manifest)
                s = _vector(_load_array(directory, f"{sub}/{fnames[1]}.f64", manifest))
                V = _load_array(directory, f"{sub}/{fnames[2]}.f64", manifest)
                setattr(sm, attr, TruncatedSVD(U, s, V))
            for attr in _VEC_FILES:
                setattr(sm, attr,
                        _vector(_load_array(directory, f"{sub}/{attr}.f64", manifest)))
            sm.buf = _load_array(directory, f"{sub}/buf.f64", manifest)
            sm.buf_len = int(manifest[pre + "buf_len"])
        model.submodels.append(sm)

    # Materialized coefficient view: validate against live state, rebuild if stale.
    stored = _load_array(directory, "coeff_avg.f64", manifest)
    if model.trained_submodels():
        bm, bv = model.averaged_coefficients()
        fresh = np.vstack([bm, bv])
        if stored.shape != fresh.shape or not np.array_equal(stored, fresh):
            model._coeff_cache.clear()
            model.averaged_coefficients()
    return model


def load_model(directory) -> PredictionModel:
    """Load a model saved by :func:`save_model`.

    Falls back to ``<dir>.bak`` when the primary copy is absent or fails
    validation (the signature an interrupted save leaves behind).
    """
    directory = os.fspath(directory)
    backup = directory + ".bak"
    try:
        return _load_from(directory)
    except PersistenceReadError:
        if os.path.isdir(backup):
            return _load_from(backup)
        raise CorruptManifest(f"no loadable model at {directory}") from None
    except (ChecksumMismatch, CorruptManifest, VersionUnsupported):
        raise

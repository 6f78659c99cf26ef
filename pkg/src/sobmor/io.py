"""Plain-text formats for matrices, models, parameter vectors, samples and reports.

Every float is written with 17 significant digits so that reading back gives
the identical binary value.
"""

import os
from pathlib import Path

import numpy as np

from .models import FrequencySampleSet, PHModel, SSOModel, StateSpaceModel, check_structure
from .param import Layout, ParamVector

__all__ = [
    "FormatError",
    "write_matrix",
    "read_matrix",
    "write_model",
    "read_model",
    "write_theta",
    "read_theta",
    "write_samples",
    "read_samples",
    "write_report",
    "read_report",
    "read_config",
    "fmt",
]

_ROLES = {
    "ph": ("J", "R", "Q", "B"),
    "sso": ("M", "D", "K", "B"),
    "ss": ("A", "B", "C", "D", "E"),
}


class FormatError(ValueError):
    """Malformed input file; ``line`` is the 1-based line number when known."""

    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")


def fmt(x):
    return f"{float(x):.17g}"


def _lines(path):
    with open(path) as fh:
        return fh.read().splitlines()


def _float(tok, path, lineno):
    try:
        return float(tok)
    except ValueError:
        raise FormatError(path, lineno, f"cannot parse {tok!r} as a number") from None


def write_matrix(path, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for row in X:
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def read_matrix(path):
    lines = [(i, ln) for i, ln in enumerate(_lines(path), 1) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise FormatError(path, None, "empty matrix file")
    lineno, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise FormatError(path, lineno, "expected header 'rows cols'")
    rows, cols = int(parts[0]), int(parts[1])
    vals = []
    for lineno, ln in lines[1:]:
        vals.extend(_float(t, path, lineno) for t in ln.split())
    if len(vals) != rows * cols:
        raise FormatError(path, None, f"expected {rows * cols} entries, found {len(vals)}")
    return np.array(vals, dtype=float).reshape(rows, cols)


def _parse_kv(path):
    out = {}
    for lineno, ln in enumerate(_lines(path), 1):
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise FormatError(path, lineno, "expected 'key = value'")
        k, v = (t.strip() for t in s.split("=", 1))
        if not k:
            raise FormatError(path, lineno, "empty key")
        out[k] = v
    return out


def read_config(path):
    """Line-oriented ``key = value`` file as a dict of strings."""
    return _parse_kv(path)


def _structure_of(model):
    if isinstance(model, PHModel):
        return "ph"
    if isinstance(model, SSOModel):
        return "sso"
    if isinstance(model, StateSpaceModel):
        return "ss"
    raise TypeError(f"unsupported model type {type(model).__name__}")


def write_model(model, directory, stem="model"):
    """Write one matrix file per role plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    structure = _structure_of(model)
    entries = [f"structure = {structure}"]
    for role in _ROLES[structure]:
        X = getattr(model, role)
        if X is None:
            continue
        name = f"{stem}_{role}.txt"
        write_matrix(directory / name, X)
        entries.append(f"{role} = {name}")
    manifest = directory / f"{stem}.manifest"
    manifest.write_text("\n".join(entries) + "\n")
    return manifest


def read_model(path, validate=True):
    """Load a model from its manifest; structured models are checked on load."""
    path = Path(path)
    kv = _parse_kv(path)
    structure = kv.pop("structure", None)
    if structure not in _ROLES:
        raise FormatError(path, None, f"unknown or missing structure {structure!r}")
    mats = {}
    for role in _ROLES[structure]:
        if role not in kv:
            continue
        mats[role] = read_matrix(path.parent / kv.pop(role))
    unknown = sorted(kv)
    if unknown:
        raise FormatError(path, None, f"unknown roles {unknown} for structure {structure!r}")
    try:
        if structure == "ph":
            model = PHModel(**mats, validate=False)
        elif structure == "sso":
            model = SSOModel(**mats, validate=False)
        else:
            model = StateSpaceModel(**mats)
    except TypeError as exc:
        raise FormatError(path, None, f"missing matrices: {exc}") from None
    if validate:
        check_structure(model)
    return model


def write_theta(path, theta):
    lay = theta.layout
    with open(path, "w") as fh:
        fh.write(f"{lay.structure} {lay.n_x} {lay.n_u}\n")
        for v in theta.data:
            fh.write(fmt(v) + "\n")


def read_theta(path):
    lines = _lines(path)
    if not lines:
        raise FormatError(path, 1, "empty parameter file")
    parts = lines[0].split()
    if len(parts) != 3:
        raise FormatError(path, 1, "expected header 'structure n_x n_u'")
    try:
        layout = Layout(parts[0], int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise FormatError(path, 1, str(exc)) from None
    vals = [_float(ln.strip(), path, i) for i, ln in enumerate(lines[1:], 2) if ln.strip()]
    if len(vals) != layout.size:
        raise FormatError(path, None, f"expected {layout.size} values, found {len(vals)}")
    return ParamVector(np.array(vals), layout)


def write_samples(path, samples):
    """Header ``samples count n_y n_u``, then per point an ``omega`` line and
    ``n_y`` lines of ``n_u`` real/imaginary pairs."""
    if not samples.has_values:
        raise ValueError("sample set has no values to write")
    k, ny, nu = samples.values.shape
    with open(path, "w") as fh:
        fh.write(f"samples {k} {ny} {nu}\n")
        for w, G in zip(samples.omegas, samples.values):
            fh.write(f"omega {fmt(w)}\n")
            for row in G:
                fh.write(" ".join(f"{fmt(z.real)} {fmt(z.imag)}" for z in row) + "\n")


def read_samples(path):
    lines = _lines(path)
    if not lines:
        raise FormatError(path, 1, "empty samples file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "samples" or not all(t.isdigit() for t in head[1:]):
        raise FormatError(path, 1, "expected header 'samples count n_y n_u'")
    k, ny, nu = (int(t) for t in head[1:])
    if len(lines) < 1 + k * (1 + ny):
        raise FormatError(path, len(lines), f"file ends early: expected {k} samples")
    omegas = np.empty(k)
    values = np.empty((k, ny, nu), dtype=complex)
    i = 1
    for j in range(k):
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] != "omega":
            raise FormatError(path, i + 1, "expected 'omega <value>'")
        omegas[j] = _float(parts[1], path, i + 1)
        i += 1
        for row in range(ny):
            toks = lines[i].split()
            if len(toks) != 2 * nu:
                raise FormatError(path, i + 1, f"expected {2 * nu} numbers, found {len(toks)}")
            nums = [_float(t, path, i + 1) for t in toks]
            values[j, row] = np.array(nums[0::2]) + 1j * np.array(nums[1::2])
            i += 1
    if any(ln.strip() for ln in lines[i:]):
        raise FormatError(path, i + 1, "unexpected trailing content")
    try:
        return FrequencySampleSet(omegas, values)
    except ValueError as exc:
        raise FormatError(path, None, str(exc)) from None


def _val(v):
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_report(path, report, extra=None):
    """Key-value report: a ``[summary]`` record followed by one ``[level j]`` record per level."""
    summary = {
        "mode": report.mode,
        "init_method": report.init_method,
        "levels": len(report.levels),
        "exhausted": report.exhausted,
        "first_level_failed": report.first_level_failed,
        "grid_max_error": report.grid_max_error,
        "hinf_estimate": report.hinf_estimate,
        "hinf_omega": report.hinf_omega,
        "h2_error": report.h2_error,
        "runtime_seconds": report.runtime_seconds,
    }
    summary.update(extra or {})
    out = ["[summary]"]
    out += [f"{k} = {_val(v)}" for k, v in summary.items() if v is not None]
    out += [f"note = {n}" for n in report.notes]
    for j, rec in enumerate(report.levels, 1):
        out += ["", f"[level {j}]"]
        out += [
            f"gamma = {fmt(rec.gamma)}",
            f"loss = {fmt(rec.loss)}",
            f"iterations = {rec.iterations}",
            f"seconds = {fmt(rec.seconds)}",
            f"termination = {rec.termination}",
            f"active = {rec.active}",
        ]
    Path(path).write_text("\n".join(out) + "\n")


def read_report(path):
    """Return ``(summary, levels)`` as string dictionaries."""
    summary, levels, cur = {}, [], None
    for lineno, ln in enumerate(_lines(path), 1):
        s = ln.strip()
        if not s:
            continue
        if s.startswith("["):
            if s == "[summary]":
                cur = summary
            elif s.startswith("[level ") and s.endswith("]"):
                cur = {}
                levels.append(cur)
            else:
                raise FormatError(path, lineno, f"unknown record {s!r}")
            continue
        if cur is None or "=" not in s:
            raise FormatError(path, lineno, "expected 'key = value' inside a record")
        k, v = (t.strip() for t in s.split("=", 1))
        if k == "note":
            cur.setdefault("notes", []).append(v)
        else:
            cur[k] = v
    return summary, levels


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)

"""Trajectory CSV export and the steady-state metrics report."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .controller import g_value
from .engine import RECORD_FIELDS, Trajectory
from .errors import ValidationError

ACTIVITY_THRESHOLD = 0.01
CSV_GEN_COLUMNS = ("omega", "delta", "Eq_prime", "P", "Q", "Tm", "Ef", "sigma_T", "sigma_E")


def _as_trajectory(records):
    if isinstance(records, Trajectory):
        return records
    return Trajectory.from_records(records)


def csv_header(n_gen, n_bus):
    header = ["t"]
    for i in range(1, n_gen + 1):
        header += [f"g{i}_{c}" for c in CSV_GEN_COLUMNS]
    header += [f"bus{b}_vmag" for b in range(1, n_bus + 1)]
    return header


def export_csv(records, path):
    """Write one header row and one row per record; floats keep full precision."""
    tr = _as_trajectory(records)
    if len(tr) == 0:
        raise ValidationError("refusing to export an empty record set")
    n, N = tr.n_gen, tr.n_bus
    block = np.stack([getattr(tr, f) for f in RECORD_FIELDS], axis=2).reshape(len(tr), 9 * n)
    table = np.hstack([tr.time[:, None], block, tr.v_mag])
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(n, N))
        for row in table:
            w.writerow([repr(float(x)) for x in row])
    return path


def read_csv(path):
    """Inverse of :func:`export_csv`."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ValidationError(f"{path}: not a trajectory file")
    header = rows[0]
    n = sum(1 for h in header if h.endswith("_omega"))
    N = sum(1 for h in header if h.endswith("_vmag"))
    if header != csv_header(n, N):
        raise ValidationError(f"{path}: unexpected column layout")
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    block = data[:, 1:1 + 9 * n].reshape(-1, n, 9)
    cols = {f: block[:, :, k].copy() for k, f in enumerate(RECORD_FIELDS)}
    return Trajectory(time=data[:, 0].copy(), v_mag=data[:, 1 + 9 * n:].copy(), **cols)


@dataclass
class MetricsReport:
    window: tuple
    final_frequency_deviation: np.ndarray
    sharing_error_P: float
    sharing_error_Q: float
    active_T: np.ndarray
    active_E: np.ndarray
    bound_violations: int
    saturated_units: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, np.ndarray):
                d[k] = v.tolist()
        d["saturated_units"] = [
            {"generator": g, "input": inp, "limit": side, "value": val, "interval": list(iv)}
            for g, inp, side, val, iv in self.saturated_units]
        d["window"] = list(self.window)
        return d


def sharing_error(weighted, active):
    """``max |x_i - x_j| / max x_i`` over the active units."""
    x = np.asarray(weighted)[np.asarray(active, dtype=bool)]
    if x.size < 2:
        return 0.0
    scale = np.max(np.abs(x))
    if scale == 0:
        return 0.0
    return float((x.max() - x.min()) / scale)


def _intervals(mask, time):
    out = []
    start = None
    for k, flag in enumerate(mask):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            out.append((float(time[start]), float(time[k - 1])))
            start = None
    if start is not None:
        out.append((float(time[start]), float(time[-1])))
    return out


def saturation_intervals(tr, params, threshold=ACTIVITY_THRESHOLD):
    """Intervals during which a unit's ``g`` is below ``threshold``."""
    found = []
    for name, sig, inp, dmax, dmin in (("T_m", tr.sigma_T, tr.T_m, params.dT_max, params.dT_min),
                                       ("E_f", tr.sigma_E, tr.E_f, params.dE_max, params.dE_min)):
        g = g_value(sig, dmax, dmin)
        for i in range(tr.n_gen):
            for side in ("max", "min"):
                near = (sig[:, i] > 0) if side == "max" else (sig[:, i] < 0)
                for t0, t1 in _intervals((g[:, i] < threshold) & near, tr.time):
                    k = np.searchsorted(tr.time, t0)
                    nominal = inp[k, i] - sig[k, i]
                    limit = nominal + dmax[i] if side == "max" else nominal - dmin[i]
                    found.append((i, name, side, float(limit), (t0, t1)))
    return found


def count_bound_violations(tr, params):
    over_T = (tr.sigma_T > params.dT_max) | (tr.sigma_T < -params.dT_min)
    over_E = (tr.sigma_E > params.dE_max) | (tr.sigma_E < -params.dE_min)
    return int(over_T.sum() + over_E.sum())


def compute_metrics(records, params, window, threshold=ACTIVITY_THRESHOLD):
    """Frequency and sharing metrics averaged over ``window = (t0, t1)``.

    Units whose window-averaged ``g`` is at or below ``threshold`` count as
    saturated and are left out of the corresponding sharing error.
    """
    tr = _as_trajectory(records)
    t0, t1 = window
    if len(tr) == 0 or t0 > t1 or t0 < tr.time[0] or t1 > tr.time[-1]:
        raise ValidationError(f"window {window} lies outside the recorded time span")
    sel = tr.window(t0, t1)
    if not np.any(sel):
        raise ValidationError(f"window {window} contains no records")
    g_T = g_value(tr.sigma_T[sel], params.dT_max, params.dT_min).mean(axis=0)
    g_E = g_value(tr.sigma_E[sel], params.dE_max, params.dE_min).mean(axis=0)
    active_T = g_T > threshold
    active_E = g_E > threshold
    P = tr.P[sel].mean(axis=0)
    Q = tr.Q[sel].mean(axis=0)
    return MetricsReport(
        window=(float(t0), float(t1)),
        final_frequency_deviation=np.max(np.abs(tr.omega[sel] - params.omega_s), axis=0),
        sharing_error_P=sharing_error(params.n_gains * P, active_T),
        sharing_error_Q=sharing_error(params.m_gains * Q, active_E),
        active_T=active_T,
        active_E=active_E,
        bound_violations=count_bound_violations(tr, params),
        saturated_units=saturation_intervals(tr, params, threshold),
    )

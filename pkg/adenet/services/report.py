# services/report.py
import csv
import io
import math
from typing import Iterable, List, Optional, Sequence

import numpy as np
from jinja2 import Template

from ..core import FitResult
from .tuning import Chosen
from .simulation import MetricsTable

LABELS = {
    "truth": "Truth", "lasso": "Lasso", "alasso": "ALasso", "enet": "Enet", "aenet": "AEnet",
    "scad": "SCAD", "sis_aenet": "SIS+AEnet", "sis_scad": "SIS+SCAD",
}
CSV_COLUMNS = ("rho", "n", "p", "support_size", "method", "mse_mean", "mse_se", "c_mean", "ic_mean",
               "exact_support_rate")

FIT_TEMPLATE = Template(
    "method: {{ method }}\n"
    "lambda1: {{ '%.6g' % lambda1 }}   lambda2: {{ '%.6g' % lambda2 }}"
    "{% if lambda1_enet is not none %}   lambda1 (stage 1): {{ '%.6g' % lambda1_enet }}{% endif %}"
    "{% if gamma is not none %}   gamma: {{ gamma }}{% endif %}\n"
    "BIC: {{ '%.4f' % bic }}\n"
    "active set ({{ active|length }} of {{ p }}): {{ active|join(', ') if active else 'empty' }}\n"
    "{% for name, value in coefficients %}  {{ '%-16s' % name }} {{ '%+.6f' % value }}\n{% endfor %}"
    "KKT residual (scaled): {{ '%.3e' % kkt }}\n"
    "converged: {{ 'yes' if converged else 'NO' }} after {{ iterations }} sweeps\n"
)


def fit_summary(fit: FitResult, chosen: Chosen, names: Sequence[str], coef=None,
                kkt_scaled: Optional[float] = None) -> dict:
    """Plain dict of a tuned fit; coef overrides fit.beta (e.g. mapped back from a standardized scale)."""
    beta = np.asarray(fit.beta if coef is None else coef, dtype=float)
    active = [int(j) for j in fit.active_set]
    return {
        "method": chosen.method,
        "lambda1": float(chosen.lambda1),
        "lambda2": float(chosen.lambda2),
        "lambda1_enet": chosen.lambda1_enet,
        "gamma": chosen.gamma,
        "bic": float(chosen.bic),
        "p": int(beta.shape[0]),
        "active": [names[j] for j in active],
        "coefficients": [(names[j], float(beta[j])) for j in active],
        "kkt": float(fit.kkt_residual if kkt_scaled is None else kkt_scaled),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
    }


def format_fit(fit: FitResult, chosen: Chosen, names: Sequence[str], coef=None,
               kkt_scaled: Optional[float] = None) -> str:
    return FIT_TEMPLATE.render(**fit_summary(fit, chosen, names, coef, kkt_scaled))


def fit_to_json(fit: FitResult, chosen: Chosen, names: Sequence[str], coef=None,
                kkt_scaled: Optional[float] = None) -> dict:
    s = fit_summary(fit, chosen, names, coef, kkt_scaled)
    beta = np.asarray(fit.beta if coef is None else coef, dtype=float)
    s["coefficients"] = {name: float(v) for name, v in zip(names, beta)}
    s["bic"] = None if math.isinf(s["bic"]) else s["bic"]
    return s


# ---------------- Tables ----------------
def _ordered(rows):
    # Truth leads each block
    return sorted(rows, key=lambda r: r.method != "truth")


def table_rows(tables: Iterable[MetricsTable]) -> List[list]:
    out = []
    for t in tables:
        s = t.scenario
        for r in _ordered(t.rows):
            out.append([
                f"{s.rho:.4f}", str(s.n), str(s.p), str(s.support_size), LABELS.get(r.method, r.method),
                f"{r.mse_mean:.4f}", f"{r.mse_se:.4f}", f"{r.c_mean:.4f}", f"{r.ic_mean:.4f}",
                f"{r.exact_support_rate:.4f}",
            ])
    return out


def table_to_csv(tables: Iterable[MetricsTable], path: Optional[str] = None) -> str:
    """CSV text of reproduced tables, written to path when given (LF endings)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(table_rows(tables))
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return text

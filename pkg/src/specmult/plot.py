"""Static SVG plots of fit and experiment reports."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so identical reports give identical bytes
matplotlib.rcParams["svg.hashsalt"] = "specmult"
matplotlib.rcParams["svg.fonttype"] = "none"


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return np.nan


def _columns(samples):
    if isinstance(samples, dict):
        return {k: list(v) for k, v in samples.items()}
    cols = {}
    for row in samples or []:
        for k, v in row.items():
            cols.setdefault(k, []).append(v)
    return cols


def _decay_axes(report, cols):
    model = report.get("model", "")
    p = report.get("params", {})
    if model in ("davies_gaffney", "gge"):
        x = np.array([_num(v) for v in cols.get("z", [])])
        y = np.array([_num(v) for v in cols.get("norm", [])])
        status = cols.get("status", ["ok"] * len(x))
        keep = np.array([s == "ok" for s in status], dtype=bool) if len(x) else np.zeros(0, bool)
        line = (lambda t: np.log(_num(p.get("C"))) - _num(p.get("b")) * t)
        return x[keep], np.log(y[keep]), line, "(d / t^(1/m))^(m/(m-1))", "log norm"
    if model == "multiplier_decay":
        x = np.array([_num(v) for v in cols.get("j", [])])
        y = np.array([_num(v) for v in cols.get("norm", [])])
        keep = y > 0
        line = (lambda t: _num(p.get("log2_C_F")) - _num(p.get("delta")) * t)
        return x[keep], np.log2(y[keep]), line, "j", "log2 norm"
    if model == "regularizer_decay":
        x = np.array([_num(v) for v in cols.get("gap", [])])
        y = np.array([_num(v) for v in cols.get("norm", [])])
        keep = y > 0
        line = (lambda t: _num(p.get("log_C")) - _num(p.get("b")) * 2.0 ** t)
        return x[keep], np.log(y[keep]), line, "|j - i|", "log norm"
    return None


def emit_plot(report, path, samples=None):
    """Render ``report`` (a report dict) to an SVG file and return the path.

    Fit reports give a scatter of the log norms with the fitted line
    (slope ``-b`` in the displayed units); experiment reports give the
    ratio per sample. An empty sample set yields axes with a "no data" note.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = _columns(samples if samples is not None else report.get("samples"))
    fig, ax = plt.subplots(figsize=(6, 4))
    title = report.get("model") or report.get("experiment") or "report"
    ax.set_title(str(title))
    drawn = False
    decay = _decay_axes(report, cols) if "model" in report else None
    if decay is not None:
        x, y, line, xl, yl = decay
        ax.set_xlabel(xl)
        ax.set_ylabel(yl)
        if x.size:
            ax.scatter(x, y, s=6, color="tab:blue", label="samples")
            grid = np.linspace(x.min(), x.max(), 100)
            fitted = line(grid)
            if np.all(np.isfinite(fitted)):
                ax.plot(grid, fitted, color="tab:red", label="fit")
            ax.legend(loc="best")
            drawn = True
    elif "ratio" in cols and cols["ratio"]:
        y = np.array([_num(v) for v in cols["ratio"]])
        ax.plot(np.arange(y.size), y, marker="o", ms=3, lw=1)
        pos = y[np.isfinite(y) & (y > 0)]
        if pos.size and pos.max() / pos.min() > 100:
            ax.set_yscale("log")
        ax.set_xlabel("sample")
        ax.set_ylabel("ratio")
        drawn = True
    if not drawn:
        ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path

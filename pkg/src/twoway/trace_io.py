"""CSV emission and re-parsing of iteration traces."""
import csv

HEADER = ["round", "algo", "l1_error", "l2_error", "holdout_loss", "mu",
          "upstream_scalars", "downstream_scalars", "inner_iters", "wall_ms"]
MISCLASS = "holdout_misclass"

_INT_FIELDS = {"round", "upstream_scalars", "downstream_scalars", "inner_iters"}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, int)) or (hasattr(v, "dtype") and v.dtype.kind in "iu"):
        return str(int(v))
    return format(float(v), ".17g")


def wants_misclass(traces):
    return any(r.holdout_misclass is not None for t in traces for r in t.rows)


def write_traces(traces, fh):
    """Write one or more traces as one CSV; a misclassification column is
    appended only when some row carries a held-out misclassification rate."""
    cols = HEADER + ([MISCLASS] if wants_misclass(traces) else [])
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for t in traces:
        for r in t.rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])


def read_traces(fh):
    """Parse a trace CSV back into a list of dicts (empty fields become None)."""
    rows = []
    for rec in csv.DictReader(fh):
        out = {}
        for k, v in rec.items():
            if v == "":
                out[k] = None
            elif k == "algo":
                out[k] = v
            elif k in _INT_FIELDS:
                out[k] = int(v)
            else:
                out[k] = float(v)
        rows.append(out)
    return rows

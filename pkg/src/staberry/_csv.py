import csv
import io
import os


def fmt(x) -> str:
    # 17 significant digits round-trips a double exactly
    return format(float(x), ".17g")


def write_csv(target, header, rows):
    """Write ``rows`` under ``header`` to a path or an open text stream."""
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", newline="") as fh:
            return write_csv(fh, header, rows)
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()

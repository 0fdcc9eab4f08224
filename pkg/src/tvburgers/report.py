"""Named scalar diagnostics with metadata, and the CSV dialect used everywhere."""
from __future__ import annotations

import io
from dataclasses import dataclass, field


def fmt(x) -> str:
    """Floats with 17 significant digits; everything else via str()."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".17g")
    try:
        import numpy as np

        if isinstance(x, np.floating):
            return format(float(x), ".17g")
        if isinstance(x, np.integer):
            return str(int(x))
    except ImportError:  # pragma: no cover
        pass
    return str(x)


def csv_text(header, rows, meta=None) -> str:
    """'#'-prefixed metadata lines, a header row, then the data; '\\n' endings."""
    buf = io.StringIO()
    for key, val in (meta or {}).items():
        buf.write(f"# {key}: {fmt(val)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


@dataclass
class ResidualReport:
    """Ordered name -> value diagnostics plus provenance metadata."""

    name: str
    values: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __setitem__(self, key, value):
        self.values[key] = value

    def __getitem__(self, key):
        return self.values[key]

    def __contains__(self, key):
        return key in self.values

    def to_csv(self) -> str:
        meta = {"report": self.name, **self.meta}
        return csv_text(["quantity", "value"], list(self.values.items()), meta)

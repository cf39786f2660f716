"""CSV and VTK artifact readers with strict schema validation.

The readers accept exactly the column layouts the simulation CLI writes.
A file with a different header raises SchemaError carrying a column diff
so the mismatch is actionable from the command line.
"""

import numpy as np

TRACE_COLUMNS = (
    ["t", "u1", "u2", "u3"]
    + [f"y{i}" for i in range(1, 25)]
    + ["E", "l2err", "CL1", "CL2", "CL3", "CLtot",
       "CD1", "CD2", "CD3", "CDtot", "Jcum"]
)

BODE_COLUMNS = ["omega", "fom_sigma_max", "rom_sigma_max"]

SHIFTS_COLUMNS = ["re", "im"]


class SchemaError(Exception):
    """Artifact does not match the expected schema.

    ``diff`` is a human-readable description of the mismatch.
    """

    def __init__(self, path, diff):
        self.path = path
        self.diff = diff
        super().__init__(f"{path}: {diff}")


def _column_diff(expected, found):
    missing = [c for c in expected if c not in found]
    extra = [c for c in found if c not in expected]
    parts = []
    if missing:
        parts.append("missing columns: " + ", ".join(missing))
    if extra:
        parts.append("unexpected columns: " + ", ".join(extra))
    if not parts:
        parts.append("columns out of order: expected "
                     + ",".join(expected) + " but found " + ",".join(found))
    return "; ".join(parts)


def read_csv(path, expected_columns):
    """Load a CSV artifact as a dict of float arrays keyed by column."""
    with open(path) as fh:
        header = fh.readline().strip()
    if not header:
        raise SchemaError(path, "empty file, expected header "
                          + ",".join(expected_columns))
    found = header.split(",")
    if found != expected_columns:
        raise SchemaError(path, _column_diff(expected_columns, found))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(expected_columns):
        raise SchemaError(path, f"{data.shape[1]} data columns for "
                          f"{len(expected_columns)} header columns")
    return {name: data[:, k] for k, name in enumerate(expected_columns)}


def read_trace(path):
    return read_csv(path, TRACE_COLUMNS)


def read_bode(path):
    return read_csv(path, BODE_COLUMNS)


def read_shifts(path):
    return read_csv(path, SHIFTS_COLUMNS)


def read_vtk(path):
    """Parse a legacy ASCII VTK unstructured triangle grid.

    Returns a dict with points (n, 2), triangles (m, 3), and whatever
    point fields are present among velocity, pressure, and vorticity.
    """
    with open(path) as fh:
        tokens = fh.read().split()
    out = {}
    i = 0
    n = len(tokens)

    def bad(msg):
        return SchemaError(path, msg)

    try:
        while i < n:
            tok = tokens[i].upper()
            if tok == "DATASET":
                if tokens[i + 1].upper() != "UNSTRUCTURED_GRID":
                    raise bad("expected an UNSTRUCTURED_GRID dataset")
                i += 2
            elif tok == "POINTS":
                npts = int(tokens[i + 1])
                vals = np.array(tokens[i + 3:i + 3 + 3 * npts], dtype=float)
                out["points"] = vals.reshape(npts, 3)[:, :2]
                i += 3 + 3 * npts
            elif tok == "CELLS":
                ncells = int(tokens[i + 1])
                total = int(tokens[i + 2])
                vals = np.array(tokens[i + 3:i + 3 + total], dtype=int)
                if not np.all(vals.reshape(ncells, -1)[:, 0] == 3):
                    raise bad("expected triangle cells")
                out["triangles"] = vals.reshape(ncells, 4)[:, 1:]
                i += 3 + total
            elif tok == "CELL_TYPES":
                ncells = int(tokens[i + 1])
                i += 2 + ncells
            elif tok == "POINT_DATA":
                i += 2
            elif tok == "VECTORS":
                name = tokens[i + 1]
                npts = len(out["points"])
                vals = np.array(tokens[i + 3:i + 3 + 3 * npts], dtype=float)
                out[name] = vals.reshape(npts, 3)[:, :2]
                i += 3 + 3 * npts
            elif tok == "SCALARS":
                name = tokens[i + 1]
                npts = len(out["points"])
                # skip the optional component count and the
                # LOOKUP_TABLE directive line
                j = i + 3
                if tokens[j].isdigit():
                    j += 1
                if tokens[j].upper() == "LOOKUP_TABLE":
                    j += 2
                out[name] = np.array(tokens[j:j + npts], dtype=float)
                i = j + npts
            else:
                i += 1
    except (IndexError, ValueError) as exc:
        raise bad(f"truncated or malformed VTK data ({exc})") from exc
    for key in ("points", "triangles"):
        if key not in out:
            raise bad(f"no {key.upper()} section found")
    if "velocity" not in out and "vorticity" not in out:
        raise bad("no velocity or vorticity point data found")
    return out

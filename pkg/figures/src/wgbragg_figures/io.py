"""Reading and validating wgbragg result tables."""

import json


class SchemaError(ValueError):
    """The file does not match any known result schema; message says why."""


KNOWN_SCHEMAS = {
    "spectrum": [["delta", "rate_r"]],
    "map": [["theta", "delta", "rate_r"]],
    "map-overlay": [["delta", "theta_mb"]],
    "scaling": [["n", "delta_max", "rate_max", "boundary_flag"],
                ["n", "rate_r"]],
    "voids": [["beta_or_n", "mean_rate", "std_rate", "robustness_r"]],
}


def read_table(path):
    """Parse a result file into (metadata, column names, rows).

    Metadata lines look like '# key: json-value'; the first non-comment line
    is the header; every following non-empty line is a row of floats.  Raises
    SchemaError with the offending line for anything malformed.
    """
    meta = {}
    names = None
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                key, sep, val = body.partition(": ")
                if sep:
                    try:
                        meta[key] = json.loads(val)
                    except json.JSONDecodeError:
                        meta[key] = val
                continue
            if not line.strip():
                continue
            if names is None:
                names = [c.strip() for c in line.split(",")]
                if any(not c for c in names):
                    raise SchemaError(
                        f"{path}:{lineno}: empty column name in header {names}")
                continue
            cells = line.split(",")
            if len(cells) != len(names):
                raise SchemaError(
                    f"{path}:{lineno}: row has {len(cells)} cells, header "
                    f"names {len(names)} columns {names}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
    if names is None:
        raise SchemaError(f"{path}: no header row found")
    return meta, names, rows


def check_schema(kind, names, path="<table>"):
    """Columns must match one of the layouts the kind is rendered from."""
    allowed = KNOWN_SCHEMAS.get(kind)
    if allowed is None:
        raise SchemaError(f"{path}: unknown result kind {kind!r}; "
                          f"known kinds: {sorted(KNOWN_SCHEMAS)}")
    if names not in allowed:
        expected = " or ".join(str(a) for a in allowed)
        raise SchemaError(f"{path}: columns {names} do not match the "
                          f"{kind!r} schema; expected {expected}")

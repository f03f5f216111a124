"""Plain-text ``key = value`` configuration files."""

from __future__ import annotations

from dataclasses import fields

from alphaq.exceptions import ParseError
from alphaq.simulation import AlphaSpec, SimConfig

__all__ = ["parse_kv", "read_kv", "format_kv", "write_kv", "sim_from_kv", "sim_to_kv"]


def parse_kv(text, path=None):
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw!r}", path=path, line=line_no)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", path=path, line=line_no)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", path=path, line=line_no)
        out[key] = value
    return out


def read_kv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_kv(fh.read(), path=path)


def format_kv(mapping):
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in mapping.items())


def write_kv(mapping, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_kv(mapping))


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(text, kind):
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return kind(text)


def sim_to_kv(config: SimConfig, alpha: AlphaSpec = None):
    out = dict(config.to_dict())
    alpha = alpha or AlphaSpec.null()
    out["alpha_kind"] = alpha.kind
    out["n_active"] = alpha.n_active
    return out


def sim_from_kv(mapping):
    """Build ``(SimConfig, AlphaSpec)`` from string key-value pairs."""
    kinds = {"T": int, "N": int, "delta_gamma": float, "psi": float, "innovation": str,
             "kappa": float, "burn_in": int, "seed": int, "n_factors": int, "latent": bool,
             "start_month": str}
    known = {f.name for f in fields(SimConfig)}
    unknown = set(mapping) - known - {"alpha_kind", "n_active"}
    if unknown:
        raise ParseError(f"unknown simulation keys {sorted(unknown)}")
    kwargs = {}
    for key in known & set(mapping):
        try:
            kwargs[key] = _coerce(mapping[key], kinds[key])
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}") from None
    config = SimConfig(**kwargs)
    n_active = int(mapping.get("n_active", 0))
    kind = mapping.get("alpha_kind", "sparse" if n_active else "null")
    return config, AlphaSpec(kind, n_active)

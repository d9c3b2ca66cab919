"""Critical-sharpness probes, stability thresholds and experiment commands."""

from ._sharpline import (
    ConfigError,
    DegenerateDenominatorError,
    InvalidArgument,
    Mlp,
    NoBoundaryError,
    NonFiniteError,
    ParseError,
    SchemaError,
    SharplineError,
    ZeroDirectionError,
    adamw_threshold,
    directional_sharpness,
    gd_wd_threshold,
    generate_task,
    mix_sweep,
    plot,
    power_iteration,
    quad_validate,
    quadratic_critical_sharpness,
    simulate_adamw_frozen,
    simulate_gd_wd,
    stability_predicate,
    train,
)


def config_text(**keys):
    """Build `key = value` config text; use '__' for '.' in key names."""
    lines = []
    for key, value in keys.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key.replace('__', '.')} = {value}")
    return "\n".join(lines) + "\n"


__all__ = [name for name in dir() if not name.startswith("_")]

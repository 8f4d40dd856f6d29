"""Run configuration shared by the command line and the experiment scripts."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cusp_core import A3System, principal_system, stock_flat_system
from .errors import ConfigError
from .expr import read_expression_file, system_from_expressions


@dataclass
class RunConfig:
    """Everything a command needs; JSON keys map one-to-one onto fields.

    ``system`` is ``"principal"``, ``"eps-flat"``, ``"origin-flat"`` or
    ``"expr"``. For ``"expr"`` the perturbations come from ``expr``
    (a mapping with keys f1, f2, f3) or from the file ``expr_file``.
    """

    system: str = "principal"
    amplitude: float = 1.0
    kappa: float = 0.06
    expr: dict = field(default_factory=dict)
    expr_file: str | None = None

    rtol: float = 1e-10
    atol: float = 1e-12
    a_minus: float = 1.0
    a_plus: float = 1.0
    L: float = 0.5
    M: float = 1.0
    delta: float = 1.0
    out: str = "cusplab_out"
    seed: int = 0

    # command parameters
    b: float = 0.0
    z0: float | None = None
    eps: float = 1e-2
    eps_list: list = field(default_factory=lambda: [1e-2, 5e-3, 2e-3, 1e-3])
    mu_list: list = field(default_factory=lambda: [-1.0, -0.5, 0.0, 0.5, 1.0])
    layer_rates: bool = False
    fold_eps: list = field(default_factory=lambda: [10 ** (-5 + k / 3) for k in range(7)])
    A0: float = 1.0
    z_exit_depth: float = 0.25
    z_offset: float = 0.5
    target_shift: float = 0.0
    criteria: list = field(default_factory=list)

    def validate(self) -> "RunConfig":
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("tolerances must be positive")
        if not 0 < self.L < self.M:
            raise ConfigError(f"layer constants need 0 < L < M, got L={self.L}, M={self.M}")
        if not (self.a_minus > 0 and self.a_plus > 0):
            raise ConfigError("section values a_minus and a_plus must be positive")
        if self.system not in ("principal", "eps-flat", "origin-flat", "expr"):
            raise ConfigError(f"unknown system {self.system!r}")
        return self

    def build_system(self) -> A3System:
        if self.system == "principal":
            return principal_system()
        if self.system == "eps-flat":
            return stock_flat_system("eps", self.amplitude, self.kappa)
        if self.system == "origin-flat":
            return stock_flat_system("origin", self.amplitude)
        exprs = dict(self.expr)
        if self.expr_file:
            exprs.update(read_expression_file(self.expr_file))
        unknown = set(exprs) - {"f1", "f2", "f3"}
        if unknown:
            raise ConfigError(f"unknown expression keys {sorted(unknown)}")
        return system_from_expressions(exprs.get("f1"), exprs.get("f2"), exprs.get("f3"))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config (or start from defaults) and apply overrides.

    Raises
    ------
    ConfigError
        Missing or malformed file, unknown keys, or invalid values.
    """
    data = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()

"""Run configuration: flat ``key = value`` text with dotted keys.

Example::

    # qwz Chern insulator, lower band
    model.name = qwz
    model.u = 1.0
    grid.n1 = 32
    grid.n2 = 32
    window.lo = 1
    window.hi = 1
    route = auto
    seed = 7

Lines starting with ``#`` and blank lines are ignored.  Every recognised key
is listed in :data:`KEYS`; model parameters go under ``model.<param>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .models import BlochModel, builtin, gallery, read_model

__all__ = ["RunConfig", "Diagnostic", "KEYS", "ROUTES", "parse_config", "load_config", "validate", "build_model"]

ROUTES = ("auto", "basis", "augmented", "embedded")
METHODS = ("transport", "projection")
PROJECTORS = ("eigensum", "riesz")

# key -> (type, description); model.<param> keys are handled separately
KEYS = {
    "model.name": (str, "gallery model name"),
    "model.file": (str, "path to a model file (instead of model.name)"),
    "grid.n1": (int, "k-points along b1"),
    "grid.n2": (int, "k-points along b2"),
    "grid.n3": (int, "k-points along b3"),
    "window.lo": (int, "lowest band of the window (1-based)"),
    "window.hi": (int, "highest band of the window (1-based)"),
    "window.e_lo": (float, "lower end of an energy window"),
    "window.e_hi": (float, "upper end of an energy window"),
    "route": (str, "auto, basis, augmented or embedded"),
    "method": (str, "trivialization method: transport or projection"),
    "projector": (str, "eigensum or riesz"),
    "projector.q_pts": (int, "Riesz quadrature nodes"),
    "seed": (int, "random seed"),
    "tol.gap": (float, "minimal direct gap"),
    "tol.residual": (float, "Parseval certificate tolerance"),
    "parseval.trials": (int, "random trial functions for the real-space check"),
    "fit.lo": (int, "first shell of the decay fit"),
    "fit.hi": (int, "last shell of the decay fit"),
    "output.dir": (str, "output directory"),
    "emit.bands": (bool, "write bands.csv"),
    "emit.chern": (bool, "write chern.txt"),
    "emit.frame": (bool, "write frame.txt"),
    "emit.wannier": (bool, "write wannier_coeffs.csv"),
    "emit.plots": (bool, "write wannier_shells.csv"),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class Diagnostic:
    key: str
    kind: str  # "syntax", "unknown-key", "type", "range", "grid-too-coarse", "unknown-model", ...
    message: str

    def __str__(self):
        return f"{self.key}: {self.message} [{self.kind}]"


@dataclass(frozen=True)
class RunConfig:
    model_name: str | None = None
    model_file: str | None = None
    model_params: dict = field(default_factory=dict)
    grid: tuple[int, ...] = ()
    window_lo: int | None = None
    window_hi: int | None = None
    energy: tuple[float, float] | None = None
    route: str = "auto"
    method: str = "transport"
    projector: str = "eigensum"
    q_pts: int = 256
    seed: int = 0
    gap_tol: float = 1e-8
    residual_tol: float = 1e-9
    parseval_trials: int = 20
    fit_range: tuple[int, int] | None = None
    output_dir: str = "out"
    emit: dict = field(
        default_factory=lambda: {"bands": True, "chern": True, "frame": True, "wannier": True, "plots": True}
    )
    diagnostics: tuple[Diagnostic, ...] = ()  # syntax problems found while parsing

    def with_overrides(self, seed=None, out=None, route=None, grid=None) -> "RunConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if out is not None:
            changes["output_dir"] = str(out)
        if route is not None:
            changes["route"] = route
        if grid is not None:
            changes["grid"] = tuple(grid)
        return replace(self, **changes)

    def summary_lines(self) -> list[str]:
        """Normalised ``key = value`` lines, used verbatim in the run report."""
        lines = []
        if self.model_name is not None:
            lines.append(f"model.name = {self.model_name}")
        if self.model_file is not None:
            lines.append(f"model.file = {self.model_file}")
        lines += [f"model.{k} = {v!r}" for k, v in sorted(self.model_params.items())]
        lines += [f"grid.n{j + 1} = {n}" for j, n in enumerate(self.grid)]
        if self.energy is not None:
            lines += [f"window.e_lo = {self.energy[0]!r}", f"window.e_hi = {self.energy[1]!r}"]
        else:
            lines += [f"window.lo = {self.window_lo}", f"window.hi = {self.window_hi}"]
        lines += [
            f"route = {self.route}",
            f"method = {self.method}",
            f"projector = {self.projector}",
            f"seed = {self.seed}",
            f"tol.gap = {self.gap_tol!r}",
            f"tol.residual = {self.residual_tol!r}",
        ]
        return lines


def _convert(key: str, kind, raw: str):
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return kind(raw)


def parse_config(text: str) -> RunConfig:
    """Parse config text.  Syntax and type problems become diagnostics, not exceptions."""
    diags: list[Diagnostic] = []
    values: dict = {}
    params: dict = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            diags.append(Diagnostic(f"line {lineno}", "syntax", f"expected 'key = value', got {raw.strip()!r}"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            diags.append(Diagnostic(key, "duplicate-key", f"given more than once (line {lineno})"))
            continue
        seen.add(key)
        if key in KEYS:
            kind = KEYS[key][0]
            try:
                values[key] = _convert(key, kind, value)
            except ValueError:
                diags.append(Diagnostic(key, "type", f"expected {kind.__name__}, got {value!r}"))
        elif key.startswith("model.") and key.count(".") == 1:
            try:
                params[key[len("model."):]] = float(value)
            except ValueError:
                diags.append(Diagnostic(key, "type", f"model parameters are numbers, got {value!r}"))
        else:
            diags.append(Diagnostic(key, "unknown-key", "not a recognised configuration key"))

    grid = []
    for j in (1, 2, 3):
        if f"grid.n{j}" in values:
            grid.append(values[f"grid.n{j}"])
        elif any(f"grid.n{i}" in values for i in range(j + 1, 4)):
            diags.append(Diagnostic(f"grid.n{j}", "range", "grid sizes must be given without gaps"))
            break
    energy = None
    if "window.e_lo" in values or "window.e_hi" in values:
        energy = (values.get("window.e_lo", float("nan")), values.get("window.e_hi", float("nan")))
    fit = None
    if "fit.lo" in values or "fit.hi" in values:
        fit = (values.get("fit.lo", 2), values.get("fit.hi", 2))
    defaults = RunConfig()
    emit = dict(defaults.emit)
    for name in emit:
        emit[name] = values.get(f"emit.{name}", emit[name])
    return RunConfig(
        model_name=values.get("model.name"),
        model_file=values.get("model.file"),
        model_params=params,
        grid=tuple(grid),
        window_lo=values.get("window.lo"),
        window_hi=values.get("window.hi", values.get("window.lo")),
        energy=energy,
        route=values.get("route", defaults.route),
        method=values.get("method", defaults.method),
        projector=values.get("projector", defaults.projector),
        q_pts=values.get("projector.q_pts", defaults.q_pts),
        seed=values.get("seed", defaults.seed),
        gap_tol=values.get("tol.gap", defaults.gap_tol),
        residual_tol=values.get("tol.residual", defaults.residual_tol),
        parseval_trials=values.get("parseval.trials", defaults.parseval_trials),
        fit_range=fit,
        output_dir=values.get("output.dir", defaults.output_dir),
        emit=emit,
        diagnostics=tuple(diags),
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def build_model(config: RunConfig) -> BlochModel:
    if config.model_file is not None:
        return read_model(config.model_file)
    return builtin(config.model_name, **config.model_params)


def validate(config: RunConfig) -> list[Diagnostic]:
    """Schema and range checks that need no numerics beyond building the model."""
    diags = list(config.diagnostics)
    add = lambda key, kind, msg: diags.append(Diagnostic(key, kind, msg))  # noqa: E731

    fiber_dim = dim = None
    models = gallery()
    if config.model_name is None and config.model_file is None:
        add("model.name", "missing", f"no model given; valid models: {', '.join(models)}")
    elif config.model_name is not None and config.model_file is not None:
        add("model.name", "conflict", "give either model.name or model.file, not both")
    elif config.model_name is not None and config.model_name not in models:
        add("model.name", "unknown-model", f"unknown model {config.model_name!r}; valid models: {', '.join(models)}")
    else:
        if config.model_name is not None:
            defaults = models[config.model_name][0]
            for p in sorted(set(config.model_params) - set(defaults)):
                add(f"model.{p}", "unknown-key", f"{config.model_name} has parameters {sorted(defaults)}")
        try:
            model = build_model(config)
            fiber_dim, dim = model.fiber_dim, model.dim
        except Exception as exc:  # any construction failure is a config problem here
            add("model", "model", str(exc))

    if not config.grid:
        add("grid.n1", "missing", "no grid sizes given")
    for j, n in enumerate(config.grid):
        if n < 2:
            add(f"grid.n{j + 1}", "grid-too-coarse", f"needs at least 2 points, got {n}")
    if dim is not None and config.grid and len(config.grid) != dim:
        add("grid", "range", f"model is {dim}-dimensional but {len(config.grid)} grid sizes were given")

    if config.energy is not None:
        if config.window_lo is not None:
            add("window", "conflict", "give band indices or an energy interval, not both")
        e_lo, e_hi = config.energy
        if not e_lo < e_hi:
            add("window.e_lo", "range", f"energy interval [{e_lo}, {e_hi}] is empty or incomplete")
    elif config.window_lo is None:
        add("window.lo", "missing", "no spectral window given")
    else:
        lo, hi = config.window_lo, config.window_hi
        if lo < 1 or hi < lo:
            add("window.lo", "range", f"band range [{lo}, {hi}] is not a valid 1-based range")
        elif fiber_dim is not None and hi > fiber_dim:
            add("window.hi", "range", f"window [{lo}, {hi}] exceeds fiber dimension {fiber_dim}")

    if config.route not in ROUTES:
        add("route", "range", f"unknown route {config.route!r}; valid: {', '.join(ROUTES)}")
    if config.method not in METHODS:
        add("method", "range", f"unknown method {config.method!r}; valid: {', '.join(METHODS)}")
    if config.projector not in PROJECTORS:
        add("projector", "range", f"unknown projector {config.projector!r}; valid: {', '.join(PROJECTORS)}")
    if config.q_pts < 8 or config.q_pts % 4:
        add("projector.q_pts", "range", "needs a multiple of 4 that is at least 8")
    if config.gap_tol <= 0 or config.residual_tol <= 0:
        add("tol", "range", "tolerances must be positive")
    if config.parseval_trials < 1:
        add("parseval.trials", "range", "needs at least one trial")
    if config.seed < 0:
        add("seed", "range", "seed must be non-negative")
    return diags

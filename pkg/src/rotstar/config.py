"""Flat ``key = value`` run configuration with dotted keys.

Unknown keys are rejected, every value is range-checked, and the objects
needed by a run (EOS, rotation law, grid, solver and continuation options)
are built from the validated values.
"""

import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError, RotStarError

AUTO = "auto"

# key -> (default, kind); kind in float, int, str, floats, float_or_auto
SCHEMA = {
    "eos.type": ("power_law", "str"),
    "eos.gamma": (1.5, "float"),
    "eos.coeff": (1.0, "float"),
    "eos.gamma_star": (AUTO, "float_or_auto"),
    "eos.table_path": ("", "str"),
    "rotation.mode": ("angular_velocity", "str"),
    "rotation.profile": ("inverse_poly", "str"),
    "rotation.params": ((1.0, 2.0), "floats"),
    "rotation.table_path": ("", "str"),
    "rotation.holder_delta": (0.5, "float"),
    "seed.mass": (AUTO, "float_or_auto"),
    "seed.a": (AUTO, "float_or_auto"),
    "seed.r_max": (AUTO, "float_or_auto"),
    "seed.rtol": (1e-12, "float"),
    "grid.r_max": (AUTO, "float_or_auto"),
    "grid.nr": (256, "int"),
    "grid.nmu": (32, "int"),
    "grid.lmax": (16, "int"),
    "scf.tol": (1e-8, "float"),
    "scf.max_iter": (500, "int"),
    "scf.relax": (0.5, "float"),
    "continuation.kappa_sq_step_init": (AUTO, "float_or_auto"),
    "continuation.step_min": (AUTO, "float_or_auto"),
    "continuation.step_max": (AUTO, "float_or_auto"),
    "continuation.kappa_max": (100.0, "float"),
    "continuation.max_steps": (200, "int"),
    "continuation.rho_max": (AUTO, "float_or_auto"),
    "continuation.support_frac": (0.9, "float"),
    "continuation.margin_min": (AUTO, "float_or_auto"),
    "diagnostics.s_exponent": (4.0, "float"),
    "diagnostics.floor": (1e-10, "float"),
    "output.dir": ("out", "str"),
    "output.snapshot_every": (1, "int"),
    "rng_seed": (0, "int"),
}

# target mass when neither seed.mass nor seed.a is given
DEFAULT_MASS = 4.0
# grid radius as a multiple of the seed's support radius when r_max = auto
AUTO_R_MAX_FACTOR = 2.0


def _coerce(key, raw, kind):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind == "str":
            return text
        if kind == "int":
            val = float(text)
            if val != int(val):
                raise ValueError
            return int(val)
        if kind == "float":
            return float(text)
        if kind == "float_or_auto":
            return AUTO if text.lower() in (AUTO, "none", "") else float(text)
        if kind == "floats":
            return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}", key=key) from None
    raise ConfigError(f"{key}: unknown kind {kind}", key=key)


def parse_text(text, source="<text>"):
    """Dict of raw string values from ``key = value`` lines (# comments)."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key = value, got {line!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{n}: duplicate key {key}", key=key)
        out[key] = val
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def echo(self):
        """Values in schema order, JSON friendly."""
        out = {}
        for key in SCHEMA:
            v = self.values[key]
            out[key] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self):
        lines = []
        for key, v in self.echo().items():
            if isinstance(v, list):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    # -- builders -----------------------------------------------------------

    def eos(self):
        from .eos import EquationOfState

        v = self.values
        if v["eos.type"] == "power_law":
            return EquationOfState.power_law(v["eos.gamma"], v["eos.coeff"])
        gs = None if v["eos.gamma_star"] == AUTO else v["eos.gamma_star"]
        return EquationOfState.from_csv(v["eos.table_path"], gamma=v["eos.gamma"],
                                        gamma_star=gs)

    def law(self):
        from .rotation import MomentumLaw, OmegaLaw

        v = self.values
        prof, params = v["rotation.profile"], v["rotation.params"]
        if v["rotation.mode"] == "angular_velocity":
            if prof == "inverse_poly":
                return OmegaLaw.inverse_poly(*params)
            if prof == "exponential":
                return OmegaLaw.exponential(*params)
            return OmegaLaw.from_csv(v["rotation.table_path"])
        if prof == "power":
            return MomentumLaw("power", tuple(params), holder_delta=v["rotation.holder_delta"])
        law = MomentumLaw.from_csv(v["rotation.table_path"])
        return MomentumLaw.from_table(law.table[0], law.table[1], v["rotation.holder_delta"])

    def shoot_options(self):
        v = self.values
        opts = {"rtol": v["seed.rtol"]}
        if v["seed.r_max"] != AUTO:
            opts["r_max"] = v["seed.r_max"]
        return opts

    def seed_solution(self):
        """Radial seed: shot at seed.a, or at the a whose mass is seed.mass."""
        from .radial import find_a_for_mass, shoot

        v = self.values
        eos = self.eos()
        if v["seed.a"] != AUTO:
            a = v["seed.a"]
        else:
            a = find_a_for_mass(eos, self.mass, **self.shoot_options())
        sol = shoot(eos, a, **self.shoot_options())
        if not sol.compact:
            from .errors import NotCompactError
            raise NotCompactError(f"seed profile at a = {a:g} is not compactly supported")
        return sol

    @property
    def mass(self):
        """Target mass; seed.mass, else M(seed.a), else DEFAULT_MASS."""
        v = self.values
        if v["seed.mass"] != AUTO:
            return v["seed.mass"]
        if v["seed.a"] != AUTO:
            if "_mass_from_a" not in self.__dict__:
                from .radial import shoot
                sol = shoot(self.eos(), v["seed.a"], **self.shoot_options())
                self.__dict__["_mass_from_a"] = sol.mass
            if self.__dict__["_mass_from_a"] is None:
                from .errors import NotCompactError
                raise NotCompactError(f"seed profile at a = {v['seed.a']:g} is not compact")
            return self.__dict__["_mass_from_a"]
        return DEFAULT_MASS

    def model(self):
        from .solver import Model

        v = self.values
        return Model(self.eos(), self.mass, mode=v["rotation.mode"], law=self.law(),
                     lmax=v["grid.lmax"], s_exponent=v["diagnostics.s_exponent"],
                     floor_rel=v["diagnostics.floor"])

    def grid(self, support_radius):
        from .gravity import Grid

        v = self.values
        r_max = v["grid.r_max"]
        if r_max == AUTO:
            r_max = AUTO_R_MAX_FACTOR * support_radius
        return Grid(v["grid.nr"], v["grid.nmu"], r_max, v["grid.lmax"])

    def scf_options(self):
        v = self.values
        return {"tol": v["scf.tol"], "max_iter": v["scf.max_iter"], "relax": v["scf.relax"]}

    def continuation_options(self):
        from .continuation import ContinuationOptions

        v = self.values

        def opt(key):
            x = v[f"continuation.{key}"]
            return None if x == AUTO else x
        return ContinuationOptions(
            kappa_sq_step_init=opt("kappa_sq_step_init"), step_min=opt("step_min"),
            step_max=opt("step_max"), kappa_max=v["continuation.kappa_max"],
            max_steps=v["continuation.max_steps"], rho_max=opt("rho_max"),
            support_frac=v["continuation.support_frac"], margin_min=opt("margin_min"),
            **self.scf_options())


def _check(cond, key, reason):
    if not cond:
        raise ConfigError(f"{key}: {reason}", key=key)


def validate(values):
    v = values
    _check(v["eos.type"] in ("power_law", "sampled"), "eos.type",
           "must be power_law or sampled")
    _check(1.0 < v["eos.gamma"] < 2.0, "eos.gamma",
           f"{v['eos.gamma']} out of (1,2)")
    _check(v["eos.coeff"] > 0, "eos.coeff", "must be positive")
    if v["eos.type"] == "sampled":
        _check(bool(v["eos.table_path"]), "eos.table_path", "required for eos.type = sampled")
    gs = v["eos.gamma_star"]
    _check(gs == AUTO or 1.2 < gs < 2.0, "eos.gamma_star", f"{gs} out of (6/5,2)")
    mode = v["rotation.mode"]
    _check(mode in ("angular_velocity", "angular_momentum"), "rotation.mode",
           "must be angular_velocity or angular_momentum")
    prof, params = v["rotation.profile"], v["rotation.params"]
    allowed = ("inverse_poly", "exponential", "table") if mode == "angular_velocity" \
        else ("power", "table")
    _check(prof in allowed, "rotation.profile", f"must be one of {allowed} for {mode}")
    if prof != "table":
        _check(len(params) == 2, "rotation.params", f"{prof} takes two numbers")
        _check(all(math.isfinite(p) for p in params), "rotation.params", "must be finite")
    else:
        _check(bool(v["rotation.table_path"]), "rotation.table_path",
               "required for rotation.profile = table")
    if prof == "inverse_poly":
        _check(params[0] >= 0, "rotation.params", "amplitude A must be >= 0")
        _check(params[1] > 1.5, "rotation.params",
               f"q = {params[1]} fails the decay condition q > 3/2")
    if prof == "exponential":
        _check(params[1] > 0, "rotation.params", "scale s0 must be positive")
    if prof == "power":
        _check(params[0] >= 0, "rotation.params", "amplitude must be >= 0")
        _check(params[1] > 1, "rotation.params", "exponent d must exceed 1 so L'(0) = 0")
    _check(0.0 < v["rotation.holder_delta"] < 1.0, "rotation.holder_delta", "must lie in (0,1)")
    _check(v["seed.mass"] == AUTO or v["seed.a"] == AUTO, "seed",
           "give exactly one of seed.mass and seed.a")
    for key in ("seed.mass", "seed.a", "seed.r_max"):
        _check(v[key] == AUTO or v[key] > 0, key, "must be positive")
    _check(0 < v["seed.rtol"] < 1e-3, "seed.rtol", "must lie in (0, 1e-3)")
    _check(v["grid.r_max"] == AUTO or v["grid.r_max"] > 0, "grid.r_max", "must be positive")
    _check(v["grid.nr"] >= 8, "grid.nr", "must be >= 8")
    _check(v["grid.nmu"] >= 1, "grid.nmu", "must be >= 1")
    _check(v["grid.lmax"] >= 0 and v["grid.lmax"] % 2 == 0, "grid.lmax",
           "must be even and >= 0 (ODD_LMAX)")
    _check(v["scf.tol"] > 0, "scf.tol", "must be positive")
    _check(v["scf.max_iter"] >= 1, "scf.max_iter", "must be >= 1")
    _check(0.0 < v["scf.relax"] <= 1.0, "scf.relax", "theta must lie in (0,1]")
    for key in ("kappa_sq_step_init", "step_min", "step_max", "rho_max"):
        x = v[f"continuation.{key}"]
        _check(x == AUTO or x > 0, f"continuation.{key}", "must be positive or auto")
    x = v["continuation.margin_min"]
    _check(x == AUTO or x >= 0, "continuation.margin_min", "must be >= 0 or auto")
    _check(v["continuation.kappa_max"] >= 0, "continuation.kappa_max", "must be >= 0")
    _check(v["continuation.max_steps"] >= 0, "continuation.max_steps", "must be >= 0")
    _check(0.0 < v["continuation.support_frac"] <= 1.0, "continuation.support_frac",
           "must lie in (0,1]")
    _check(v["diagnostics.s_exponent"] > 3, "diagnostics.s_exponent", "s must exceed 3")
    _check(0.0 < v["diagnostics.floor"] < 1.0, "diagnostics.floor", "must lie in (0,1)")
    _check(v["output.snapshot_every"] >= 0, "output.snapshot_every", "must be >= 0")


def parse_config(path=None, overrides=(), env=None):
    """Validated RunConfig from an optional file plus ``key=value`` overrides.

    ROTSTAR_OUT in ``env`` (default os.environ) replaces output.dir.
    """
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw.update(parse_text(fh.read(), str(path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, val = (p.strip() for p in item.split("=", 1))
        raw[k] = val
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", key=unknown[0])
    values = {k: _coerce(k, raw.get(k, d), kind) for k, (d, kind) in SCHEMA.items()}
    env = os.environ if env is None else env
    if env.get("ROTSTAR_OUT"):
        values["output.dir"] = env["ROTSTAR_OUT"]
    validate(values)
    cfg = RunConfig(values)
    # build the laws once so table and admissibility problems surface here
    try:
        from .eos import require_valid
        from .rotation import require_admissible_momentum, require_admissible_omega

        require_valid(cfg.eos())
        law = cfg.law()
        if values["rotation.mode"] == "angular_velocity":
            require_admissible_omega(law)
        else:
            require_admissible_momentum(law)
    except ConfigError:
        raise
    except (RotStarError, ValueError, OSError) as exc:
        raise ConfigError(f"rotation/eos: {exc}", key="rotation") from None
    return cfg

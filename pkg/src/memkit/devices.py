"""Device taxonomy for first-order nonlinear circuits.

Twelve device classes are supported: current- and voltage-controlled
resistors, capacitors, inductors, independent voltage and current sources,
charge-controlled (q-) and flux-controlled (phi-) memristors,
voltage-controlled memcapacitors, current-controlled meminductors, and the
two hybrid memristor forms whose characteristic couples both charge and
flux to a port variable.

Every non-source device carries one constitutive characteristic: a scalar
map between the circuit variables charge ``q``, flux ``phi``, current ``i``
and voltage ``v``.  The characteristic declares which variables it reads
and which variable it yields.  Partial derivatives are propagated in
forward mode through the expression tree, so the incremental parameters
(resistance, conductance, capacitance, inductance, memristance,
memductance, memcapacitance, meminductance and their hybrid analogues) are
exact rather than finite-differenced.

Characteristics are time-invariant; only source waveforms read the time.
All objects here are immutable after construction and safe to share
between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import EvalDomainError
from .expr import Add, Const, Div, Fun, Mul, Pow, Sub, Var

__all__ = [
    "DeviceClass", "Classification", "Characteristic", "SourceWaveform",
    "DeviceSpec", "classify", "eval_characteristic", "incremental_matrix",
    "linear_characteristic", "expression_characteristic",
    "chua_q_memristor", "chua_phi_memristor", "josephson_memcapacitor",
    "chua_series_hybrid", "chua_parallel_hybrid",
    "DEFAULT_FLUX_MAP", "DEFAULT_CHARGE_MAP",
]


class DeviceClass(Enum):
    """Device classes, keyed by their netlist name prefix."""

    RESISTOR = "R"          # current-controlled, v = r(i)
    CONDUCTOR = "G"         # voltage-controlled resistor, i = g(v)
    CAPACITOR = "C"         # q = c(v)
    INDUCTOR = "L"          # phi = l(i)
    VSOURCE = "V"
    ISOURCE = "I"
    Q_MEMRISTOR = "MQ"      # v = eta(q, i)
    PHI_MEMRISTOR = "MW"    # i = zeta(phi, v)
    MEMCAPACITOR = "MC"     # q = omega(phi, v)
    MEMINDUCTOR = "ML"      # phi = theta(q, i)
    HYBRID_M = "HM"         # current-controlled hybrid, v = psi(q, phi, i)
    HYBRID_W = "HW"         # voltage-controlled hybrid, i = xi(q, phi, v)

    @property
    def letter(self):
        return self.value

    @property
    def reads(self):
        return _CLASS_INFO[self][0]

    @property
    def output(self):
        return _CLASS_INFO[self][1]

    @property
    def dynamic_vars(self):
        """Dynamic variables the device contributes to the circuit state."""
        return _CLASS_INFO[self][2]

    @property
    def controlling(self):
        return _CLASS_INFO[self][3]

    @property
    def describe(self):
        return _CLASS_INFO[self][4]

    @property
    def is_source(self):
        return self in (DeviceClass.VSOURCE, DeviceClass.ISOURCE)

    @property
    def state_order(self):
        return len(self.dynamic_vars)

    @property
    def differential_order(self):
        return 1 if self.dynamic_vars else 0


# reads, output, dynamic variables, controlling variables, display name
_CLASS_INFO = {
    DeviceClass.RESISTOR: (("i",), "v", (), "current",
                           "resistor (current-controlled)"),
    DeviceClass.CONDUCTOR: (("v",), "i", (), "voltage",
                            "resistor (voltage-controlled)"),
    DeviceClass.CAPACITOR: (("v",), "q", ("q",), "voltage", "capacitor"),
    DeviceClass.INDUCTOR: (("i",), "phi", ("phi",), "current", "inductor"),
    DeviceClass.VSOURCE: ((), None, (), "time", "voltage source"),
    DeviceClass.ISOURCE: ((), None, (), "time", "current source"),
    DeviceClass.Q_MEMRISTOR: (("q", "i"), "v", ("q",), "charge, current",
                              "q-memristor"),
    DeviceClass.PHI_MEMRISTOR: (("phi", "v"), "i", ("phi",), "flux, voltage",
                                "phi-memristor"),
    DeviceClass.MEMCAPACITOR: (("phi", "v"), "q", ("q", "phi"),
                               "flux, voltage", "memcapacitor"),
    DeviceClass.MEMINDUCTOR: (("q", "i"), "phi", ("q", "phi"),
                              "charge, current", "meminductor"),
    DeviceClass.HYBRID_M: (("q", "phi", "i"), "v", ("q", "phi"),
                           "charge, flux, current",
                           "hybrid memristor (current-controlled)"),
    DeviceClass.HYBRID_W: (("q", "phi", "v"), "i", ("q", "phi"),
                           "charge, flux, voltage",
                           "hybrid memristor (voltage-controlled)"),
}

# Display name of the incremental parameter, used in hypothesis warnings.
INCREMENT_NAME = {
    DeviceClass.RESISTOR: "resistance",
    DeviceClass.CONDUCTOR: "conductance",
    DeviceClass.CAPACITOR: "capacitance",
    DeviceClass.INDUCTOR: "inductance",
    DeviceClass.Q_MEMRISTOR: "memristance",
    DeviceClass.PHI_MEMRISTOR: "memductance",
    DeviceClass.MEMCAPACITOR: "memcapacitance",
    DeviceClass.MEMINDUCTOR: "meminductance",
    DeviceClass.HYBRID_M: "hybrid memristance",
    DeviceClass.HYBRID_W: "hybrid memductance",
}


@dataclass(frozen=True)
class Classification:
    differential_order: int
    state_order: int
    controlling: str


def classify(dclass):
    """Differential order, state order and controlling variables of a class.

    Resistors and sources are order zero.  Capacitors, inductors and the
    two plain memristor kinds have state order one; memcapacitors,
    meminductors and hybrid memristors need both a charge and a flux state
    and therefore have state order two.
    """
    return Classification(dclass.differential_order, dclass.state_order,
                          dclass.controlling)


@dataclass(frozen=True)
class Characteristic:
    """A constitutive map between circuit variables.

    ``output`` is the variable the map yields, ``reads`` the variables it
    may depend on, and ``expr`` the defining expression.  ``affine_coeff``
    is set when the characteristic came from a plain element value
    (``v = R*i`` and friends) and is used for canonical printing only.
    """

    output: str
    reads: tuple
    expr: Expr
    affine_coeff: float | None = None

    def __post_init__(self):
        extra = self.expr.variables() - set(self.reads)
        if extra:
            raise ValueError(
                f"characteristic for output '{self.output}' uses "
                f"{sorted(extra)} outside its declared arity {self.reads}")

    @property
    def increment_var(self):
        """Variable whose partial defines the incremental parameter."""
        return "i" if self.output in ("v", "phi") else "v"

    def value(self, q=0.0, phi=0.0, i=0.0, v=0.0):
        result = self.expr.eval({"q": q, "phi": phi, "i": i, "v": v})
        if not math.isfinite(result):
            raise EvalDomainError(
                f"characteristic '{self.expr}' is not finite at the point")
        return result

    def partials(self, q=0.0, phi=0.0, i=0.0, v=0.0):
        """Value and the four partials (as a dict) at the point."""
        env = {"q": q, "phi": phi, "i": i, "v": v}
        value, grad = self.expr.dual(env, self.reads)
        if not all(map(math.isfinite, (value, *grad))):
            raise EvalDomainError(
                f"characteristic '{self.expr}' has a non-finite value or "
                "derivative at the point")
        out = {"q": 0.0, "phi": 0.0, "i": 0.0, "v": 0.0}
        out.update(zip(self.reads, grad))
        return value, out

    def incremental(self, q=0.0, phi=0.0, i=0.0, v=0.0):
        _, parts = self.partials(q, phi, i, v)
        return parts[self.increment_var]


def eval_characteristic(char, point):
    """Value of ``char`` at ``point = (q, phi, i, v)``."""
    q, phi, i, v = point
    return char.value(q=q, phi=phi, i=i, v=v)


def incremental_matrix(char, point):
    """The designated incremental parameter at ``point = (q, phi, i, v)``.

    For maps yielding a voltage or a flux this is the current partial
    (resistance, memristance, inductance, meminductance); for maps
    yielding a current or a charge it is the voltage partial (conductance,
    memductance, capacitance, memcapacitance).
    """
    q, phi, i, v = point
    return char.incremental(q=q, phi=phi, i=i, v=v)


@dataclass(frozen=True)
class SourceWaveform:
    """Excitation of an independent source, evaluable at any t >= 0."""

    kind: str
    level: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    offset: float = 0.0

    @classmethod
    def dc(cls, level):
        return cls(kind="dc", level=float(level))

    @classmethod
    def sine(cls, amplitude, frequency, phase=0.0, offset=0.0):
        return cls(kind="sine", amplitude=float(amplitude),
                   frequency=float(frequency), phase=float(phase),
                   offset=float(offset))

    def value(self, t):
        if self.kind == "dc":
            return self.level
        return self.offset + self.amplitude * math.sin(
            2.0 * math.pi * self.frequency * t + self.phase)


@dataclass(frozen=True)
class DeviceSpec:
    """One device: class, constitutive data and declaration metadata.

    ``origin`` records how the device was declared (builtin name and
    arguments, or a plain value) so netlists can be pretty-printed in a
    canonical form; it has no effect on evaluation.
    """

    name: str
    dclass: DeviceClass
    characteristic: Characteristic | None = None
    waveform: SourceWaveform | None = None
    origin: tuple | None = None

    def __post_init__(self):
        if self.dclass.is_source:
            if self.waveform is None or self.characteristic is not None:
                raise ValueError(f"{self.name}: sources carry a waveform "
                                 "and no characteristic")
            return
        char = self.characteristic
        if char is None or self.waveform is not None:
            raise ValueError(f"{self.name}: non-source devices carry a "
                             "characteristic and no waveform")
        if char.output != self.dclass.output:
            raise ValueError(
                f"{self.name}: characteristic yields '{char.output}' but a "
                f"{self.dclass.describe} must yield '{self.dclass.output}'")
        if not set(char.reads) <= set(self.dclass.reads):
            raise ValueError(
                f"{self.name}: characteristic reads {char.reads}, outside "
                f"the legal arity {self.dclass.reads}")


def linear_characteristic(dclass, coeff):
    """Characteristic of a plain element value: output = coeff * input."""
    ctrl = dclass.reads[0]
    expr = Mul(Const(float(coeff)), Var(ctrl))
    return Characteristic(output=dclass.output, reads=dclass.reads,
                          expr=expr, affine_coeff=float(coeff))


def expression_characteristic(dclass, expr):
    return Characteristic(output=dclass.output, reads=dclass.reads,
                          expr=expr)


# Default smooth, strictly locally passive Chua maps used by the builtin
# library: flux map phi(q) = q + q^3/3 (memristance 1 + q^2) and charge map
# q(phi) = phi + phi^3/3 (memductance 1 + phi^2).
def _cubic_map(var):
    v = Var(var)
    return Add(v, Div(Pow(v, 3.0), Const(3.0)))


DEFAULT_FLUX_MAP = _cubic_map("q")
DEFAULT_CHARGE_MAP = _cubic_map("phi")


def chua_q_memristor(name="MQ1", flux_map=None):
    """Charge-controlled memristor of Chua type, v = M(q) i.

    The memristance is the derivative of the flux map; with the default
    map it is 1 + q^2.
    """
    default = flux_map is None
    flux = DEFAULT_FLUX_MAP if default else flux_map
    expr = Mul(flux.diff("q"), Var("i"))
    char = expression_characteristic(DeviceClass.Q_MEMRISTOR, expr)
    origin = ("builtin", "chua_m", ()) if default else None
    return DeviceSpec(name=name, dclass=DeviceClass.Q_MEMRISTOR,
                      characteristic=char, origin=origin)


def chua_phi_memristor(name="MW1", charge_map=None):
    """Flux-controlled memristor of Chua type, i = W(phi) v."""
    default = charge_map is None
    charge = DEFAULT_CHARGE_MAP if default else charge_map
    expr = Mul(charge.diff("phi"), Var("v"))
    char = expression_characteristic(DeviceClass.PHI_MEMRISTOR, expr)
    origin = ("builtin", "chua_w", ()) if default else None
    return DeviceSpec(name=name, dclass=DeviceClass.PHI_MEMRISTOR,
                      characteristic=char, origin=origin)


def josephson_memcapacitor(i1, k1, g, c, name="MC1"):
    """Fully nonlinear memcapacitor equivalent to the parallel connection
    of a cosine-memductance memristor, a linear resistor and a linear
    capacitor (the dissipative part of a Josephson junction model):

        q = (i1/k1) sin(k1 phi) + g phi + c v

    The incremental memcapacitance is the constant ``c``.
    """
    if k1 == 0.0:
        raise ValueError("josephson memcapacitor needs k1 != 0")
    expr = Add(
        Add(Mul(Const(float(i1) / float(k1)),
                Fun("sin", Mul(Const(float(k1)), Var("phi")))),
            Mul(Const(float(g)), Var("phi"))),
        Mul(Const(float(c)), Var("v")))
    char = expression_characteristic(DeviceClass.MEMCAPACITOR, expr)
    return DeviceSpec(name=name, dclass=DeviceClass.MEMCAPACITOR,
                      characteristic=char,
                      origin=("builtin", "josephson_mc",
                              (float(i1), float(k1), float(g), float(c))))


def chua_series_hybrid(flux_map=None, memductance_map=None, name="HM1"):
    """Current-controlled hybrid memristor equivalent to a series pair of
    Chua memristors: v = [M(q) + 1/W(phi - phi(q))] i.

    ``flux_map`` is the charge-controlled memristor's flux map phi(q) (an
    expression in q, default q + q^3/3) and ``memductance_map`` the
    flux-controlled memristor's memductance W (an expression in phi,
    default 1 + phi^2).  W must not vanish on the working range; a root
    surfaces as a division error at evaluation time.
    """
    default = flux_map is None and memductance_map is None
    flux = DEFAULT_FLUX_MAP if flux_map is None else flux_map
    memductance = (DEFAULT_CHARGE_MAP.diff("phi")
                   if memductance_map is None else memductance_map)
    flux_q = flux.subst({"q": Var("q")})
    shifted = memductance.subst({"phi": Sub(Var("phi"), flux_q)})
    total = Add(flux.diff("q"), Div(Const(1.0), shifted))
    char = expression_characteristic(DeviceClass.HYBRID_M,
                                     Mul(total, Var("i")))
    origin = ("builtin", "hybrid_series", ()) if default else None
    return DeviceSpec(name=name, dclass=DeviceClass.HYBRID_M,
                      characteristic=char, origin=origin)


def chua_parallel_hybrid(charge_map=None, memristance_map=None, name="HW1"):
    """Voltage-controlled hybrid memristor equivalent to a parallel pair of
    Chua memristors: i = [1/M(q - gamma(phi)) + W(phi)] v with the
    memductance W = gamma'.

    ``charge_map`` is the flux-controlled memristor's charge map
    gamma(phi) (default phi + phi^3/3) and ``memristance_map`` the
    charge-controlled memristor's memristance M (an expression in q,
    default 1 + q^2), assumed not to vanish.
    """
    default = charge_map is None and memristance_map is None
    charge = DEFAULT_CHARGE_MAP if charge_map is None else charge_map
    memristance = (DEFAULT_FLUX_MAP.diff("q")
                   if memristance_map is None else memristance_map)
    shifted = memristance.subst({"q": Sub(Var("q"), charge)})
    total = Add(Div(Const(1.0), shifted), charge.diff("phi"))
    char = expression_characteristic(DeviceClass.HYBRID_W,
                                     Mul(total, Var("v")))
    origin = ("builtin", "hybrid_parallel", ()) if default else None
    return DeviceSpec(name=name, dclass=DeviceClass.HYBRID_W,
                      characteristic=char, origin=origin)

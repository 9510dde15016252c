"""Named parameter bundles for the bundled experiments."""

from fractions import Fraction


PRESETS = {
    # water-wave conjugate-flow base points
    "homogeneous": {
        "application": "waterwave",
        "parameters": {"rho": Fraction(1), "omega": Fraction(-9),
                       "h0": Fraction(2, 3), "c0": Fraction(2)},
    },
    "irrotational": {
        "application": "waterwave",
        # h0 = 1/(1+sqrt(rho)); c0 = sqrt(1-rho)/(1+sqrt(rho)) is irrational
        "parameters": {"rho": Fraction(1, 4), "omega": Fraction(0),
                       "h0": Fraction(2, 3), "c0": 3.0 ** 0.5 / 3.0},
    },
    "generic-nocrit": {
        "application": "waterwave",
        "parameters": {"rho": Fraction(25, 52), "omega": Fraction(-9, 10),
                       "h0": Fraction(2, 3), "c0": Fraction(1, 2)},
    },
    "generic-crit": {
        "application": "waterwave",
        "parameters": {"rho": Fraction(1, 28), "omega": Fraction(-18),
                       "h0": Fraction(2, 3), "c0": Fraction(1)},
    },
    # elasticity regimes
    "elasticity-front": {
        "application": "elasticity",
        "parameters": {"b1": -1.0, "lam2": 1.0, "w1": 1.0, "b2": 0.0},
    },
    "elasticity-pulse": {
        "application": "elasticity",
        "parameters": {"b1": 1.0, "lam2": 1.0, "w1": -1.0, "b2": 0.0},
    },
    # invasion front
    "fkpp-default": {
        "application": "fkpp",
        "parameters": {"beta": 1.0, "lam1": 3.0, "rho2": 1.0},
    },
    # transversal spectrum problems
    "spectrum-elasticity": {
        "application": "spectrum",
        "parameters": {"family": "elasticity"},
    },
    "spectrum-fkpp": {
        "application": "spectrum",
        "parameters": {"family": "fkpp", "beta": 1.0},
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: "
                       f"{', '.join(sorted(PRESETS))}")
    entry = PRESETS[name]
    return {"application": entry["application"],
            "parameters": dict(entry["parameters"])}

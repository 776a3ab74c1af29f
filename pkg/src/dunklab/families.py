"""Built-in group/torus families.

Lattice constraints: the cyclic and wreath constructions need a lattice the
rotation actually preserves (any modulus for order 2, square for order 4,
triangular for orders 3 and 6).  Constructors pick the right default; a user
supplied modulus that breaks invariance fails the lattice-matrix test inside
group closure.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .torus import ComplexTorus, FiniteGroup, group_closure

TRIANGULAR = complex(np.exp(2j * np.pi / 3))
SQUARE = 1j

ALLOWED_CYCLIC = (2, 3, 4, 6)


def default_modulus(ell: int) -> complex:
    if ell in (3, 6):
        return TRIANGULAR
    return SQUARE


def check_cyclic_modulus(ell: int, eta: complex):
    if ell not in ALLOWED_CYCLIC:
        raise ConfigError(
            f"cyclic/wreath order {ell} is not allowed; the torus action exists "
            f"only for orders {ALLOWED_CYCLIC} (any lattice for 2, triangular "
            "for 3 and 6, square for 4)")
    if ell == 4 and abs(eta - SQUARE) > 1e-9:
        raise ConfigError("order-4 rotation needs the square lattice (modulus i)")
    if ell in (3, 6) and abs(eta - TRIANGULAR) > 1e-9 and abs(eta - (1 + TRIANGULAR)) > 1e-9:
        raise ConfigError(
            "order-3/6 rotations need the triangular lattice (modulus exp(2 pi i/3))")


def product_torus(n: int, eta: complex) -> ComplexTorus:
    """(C / (Z + eta Z))^n with lattice generators ordered (e_k, eta e_k)."""
    if abs(complex(eta).imag) < 1e-9:
        raise ConfigError("lattice modulus must have nonzero imaginary part")
    basis = np.zeros((2 * n, n), dtype=np.complex128)
    for k in range(n):
        basis[2 * k, k] = 1.0
        basis[2 * k + 1, k] = eta
    return ComplexTorus(basis)


def cyclic_family(ell: int, eta: complex | None = None) -> tuple[ComplexTorus, FiniteGroup]:
    eta = default_modulus(ell) if eta is None else complex(eta)
    check_cyclic_modulus(ell, eta)
    torus = product_torus(1, eta)
    zeta = np.exp(2j * np.pi / ell)
    group = group_closure([np.array([[zeta]])], torus)
    return torus, group

def _transposition(n: int, i: int) -> np.ndarray:
    m = np.eye(n, dtype=np.complex128)
    m[[i, i + 1]] = m[[i + 1, i]]
    return m


def symmetric_family(n: int, eta: complex | None = None) -> tuple[ComplexTorus, FiniteGroup]:
    if n < 2:
        raise ConfigError("symmetric family needs n >= 2")
    eta = SQUARE if eta is None else complex(eta)
    torus = product_torus(n, eta)
    gens = [_transposition(n, i) for i in range(n - 1)]
    group = group_closure(gens, torus)
    return torus, group


def wreath_family(n: int, ell: int, eta: complex | None = None) -> tuple[ComplexTorus, FiniteGroup]:
    if n < 1:
        raise ConfigError("wreath family needs n >= 1")
    eta = default_modulus(ell) if eta is None else complex(eta)
    check_cyclic_modulus(ell, eta)
    torus = product_torus(n, eta)
    gens = [_transposition(n, i) for i in range(n - 1)]
    rot = np.eye(n, dtype=np.complex128)
    rot[0, 0] = np.exp(2j * np.pi / ell)
    gens.append(rot)
    group = group_closure(gens, torus)
    return torus, group


def custom_family(generators, lattice_basis) -> tuple[ComplexTorus, FiniteGroup]:
    torus = ComplexTorus(np.asarray(lattice_basis, dtype=np.complex128))
    group = group_closure([np.asarray(g, dtype=np.complex128) for g in generators], torus)
    return torus, group


BUILTIN_FAMILIES = {
    "cyclic(2)": lambda: cyclic_family(2),
    "cyclic(3)": lambda: cyclic_family(3),
    "cyclic(4)": lambda: cyclic_family(4),
    "cyclic(6)": lambda: cyclic_family(6),
    "symmetric(2)": lambda: symmetric_family(2),
    "symmetric(3)": lambda: symmetric_family(3),
    "wreath(2,2)": lambda: wreath_family(2, 2),
}

"""Shared fixtures and random parameter generators for the test suite."""

import numpy as np
import pytest

from hmbandit import ArmParams


def random_arm(rng, tied=True, margin=0.05):
    """Draw a valid arm uniformly, keeping probabilities away from {0, 1}.

    With ``tied`` the rewards equal the observation probabilities, which is
    the regime most of the structural results assume.
    """
    lo, hi = margin, 1.0 - margin
    lam0, lam1, mu0, mu1 = rng.uniform(lo, hi, size=4)
    r0, r1 = np.sort(rng.uniform(lo, hi, size=2))
    while r1 - r0 < 0.05:
        r0, r1 = np.sort(rng.uniform(lo, hi, size=2))
    if tied:
        e0, e1 = r0, r1
    else:
        e0, e1 = np.sort(rng.uniform(lo, hi, size=2))
        while e1 - e0 < 0.05:
            e0, e1 = np.sort(rng.uniform(lo, hi, size=2))
    return ArmParams(lambda0=float(lam0), lambda1=float(lam1),
                     mu0=float(mu0), mu1=float(mu1),
                     rho0=float(r0), rho1=float(r1),
                     eta0=float(e0), eta1=float(e1))


def random_case1_arm(rng):
    """Arm inside the slowly-mixing band where the sampled chain is
    nearly frozen (small mu0 - mu1 >= 0) and the passive drift is mild."""
    mu1 = rng.uniform(0.3, 0.7)
    mu0 = mu1 + rng.uniform(0.0, 0.2)
    lam1 = rng.uniform(0.3, 0.7)
    lam0 = lam1 + rng.uniform(-0.2, 0.2)
    r0, r1 = np.sort(rng.uniform(0.1, 0.9, size=2))
    while r1 - r0 < 0.1:
        r0, r1 = np.sort(rng.uniform(0.1, 0.9, size=2))
    return ArmParams(lambda0=float(np.clip(lam0, 0.05, 0.95)),
                     lambda1=float(lam1), mu0=float(mu0), mu1=float(mu1),
                     rho0=float(r0), rho1=float(r1),
                     eta0=float(r0), eta1=float(r1))


def random_case2_arm(rng):
    """Arm in the complementary band: mu1 - mu0 in [0, 1/3]."""
    mu0 = rng.uniform(0.2, 0.6)
    mu1 = min(mu0 + rng.uniform(0.0, 1.0 / 3.0), 0.95)
    lam1 = rng.uniform(0.3, 0.7)
    lam0 = lam1 + rng.uniform(-1.0 / 3.0, 1.0 / 3.0)
    r0, r1 = np.sort(rng.uniform(0.1, 0.9, size=2))
    while r1 - r0 < 0.1:
        r0, r1 = np.sort(rng.uniform(0.1, 0.9, size=2))
    return ArmParams(lambda0=float(np.clip(lam0, 0.05, 0.95)),
                     lambda1=float(lam1), mu0=float(mu0), mu1=float(mu1),
                     rho0=float(r0), rho1=float(r1),
                     eta0=float(r0), eta1=float(r1))


def random_ordered_arm(rng):
    """Arm satisfying the ordering that admits closed-form index regions:
    identical active/passive dynamics, state 0 stickier than state 1."""
    mu1 = rng.uniform(0.05, 0.4)
    mu0 = rng.uniform(mu1 + 0.15, 0.95)
    r0 = rng.uniform(0.02, 0.4)
    r1 = rng.uniform(r0 + 0.2, 0.98)
    return ArmParams(lambda0=float(mu0), lambda1=float(mu1),
                     mu0=float(mu0), mu1=float(mu1),
                     rho0=float(r0), rho1=float(r1),
                     eta0=float(r0), eta1=float(r1))


@pytest.fixture(scope="session")
def flip_arm():
    """Symmetric flip dynamics; the workhorse example throughout."""
    return ArmParams(lambda0=0.9, lambda1=0.1, mu0=0.1, mu1=0.9,
                     rho0=0.1, rho1=0.9, eta0=0.1, eta1=0.9)


@pytest.fixture(scope="session")
def sticky_arm():
    """lambda = mu ordering with a wide observation gap; admits
    closed-form index regions."""
    return ArmParams(lambda0=0.9, lambda1=0.1, mu0=0.9, mu1=0.1,
                     rho0=0.1, rho1=0.95, eta0=0.1, eta1=0.95)

import numpy as np
import pytest

from subfilter.gaussian import DiagonalCovariance
from subfilter.models.linear import LinearSSMConfig, linear_ssm_ops
from subfilter.subspace.basis import SubspaceBasis


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Artifact cache shared by every Lorenz experiment in the session."""
    return tmp_path_factory.mktemp("artifacts")


def random_spd(rng, d, floor=0.1):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + floor * np.eye(d)


def random_linear_system(rng, d, m):
    mm = rng.standard_normal((d, d))
    mm *= 0.95 / max(1.0, np.max(np.abs(np.linalg.eigvals(mm))))
    h = rng.standard_normal((m, d))
    q = rng.uniform(0.05, 0.5, d)
    r = random_spd(rng, m, 0.2)
    return linear_ssm_ops(LinearSSMConfig(mm, h, q, r))


def plain_basis(p, offset=None):
    """Wrap an arbitrary full-column-rank matrix as a basis."""
    p = np.asarray(p, dtype=float)
    lam = np.sort(np.sum(p**2, axis=0))[::-1]
    off = np.zeros(p.shape[0]) if offset is None else offset
    return SubspaceBasis(p, lam, "pca", off)


def diag_q(beta, d):
    return DiagonalCovariance.scaled_identity(beta, d)


# criterion number -> list of (part, passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record_criterion(number: int, part: str, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))
    print(f"criterion {number} [{part}] {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{name}: {'ok' if ok else 'FAILED'} ({text})" for name, ok, text in parts)
        terminalreporter.write_line(f"criterion {number:2d} {status}  {detail}")

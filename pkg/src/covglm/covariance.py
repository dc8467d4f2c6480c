"""Joint covariance assembly and its derivatives.

The within-response covariance is V^(1/2) Omega(tau) V^(1/2) (plus diag(mu)
for the count kind); responses are coupled through a correlation matrix by
sandwiching the per-response Cholesky factors around the Kronecker-expanded
correlation. Derivatives with respect to the dispersion parameters feed the
Pearson estimating function.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite
from .families import variance_eval

_FD_STEP = 1e-6


@dataclass(frozen=True)
class DispersionVector:
    """Free dispersion parameters: correlations then per-response taus.

    ``rho`` holds the R(R-1)/2 between-response correlations in row-major
    upper-triangle order; ``tau`` holds one coefficient vector per response,
    parallel to its matrix linear predictor.
    """

    rho: np.ndarray
    tau: tuple

    @classmethod
    def initial(cls, n_responses, tau_lengths):
        rho = np.zeros(n_responses * (n_responses - 1) // 2)
        taus = []
        for m in tau_lengths:
            t = np.full(m, 0.1)
            t[0] = 1.0
            taus.append(t)
        return cls(rho=rho, tau=tuple(taus))

    @property
    def n_free(self):
        return len(self.rho) + sum(len(t) for t in self.tau)

    def flatten(self):
        return np.concatenate([self.rho] + [np.asarray(t) for t in self.tau])

    def replace_flat(self, values):
        values = np.asarray(values, dtype=float)
        rho = values[: len(self.rho)]
        taus = []
        pos = len(self.rho)
        for t in self.tau:
            taus.append(values[pos : pos + len(t)].copy())
            pos += len(t)
        return DispersionVector(rho=rho.copy(), tau=tuple(taus))


def rho_pairs(n_responses):
    """Index pairs (r, s), r < s, in row-major upper-triangle order."""
    return [
        (r, s) for r in range(n_responses) for s in range(r + 1, n_responses)
    ]


def correlation_matrix(rho, n_responses):
    sigma_b = np.eye(n_responses)
    for idx, (r, s) in enumerate(rho_pairs(n_responses)):
        sigma_b[r, s] = sigma_b[s, r] = rho[idx]
    return sigma_b


def build_omega(tau_r, z_list):
    """Omega = sum_d tau_d Z_d for one response."""
    if len(tau_r) != len(z_list):
        raise ValueError(
            f"got {len(tau_r)} dispersion coefficients for {len(z_list)} matrices"
        )
    omega = np.zeros_like(z_list[0])
    for coef, z in zip(tau_r, z_list):
        omega = omega + coef * z
    return omega


def build_sigma_r(mu, var, omega, ntrial=None):
    """Per-response covariance V^(1/2) Omega V^(1/2) (+ diag(mu) for counts)."""
    v = variance_eval(var, mu)
    if ntrial is not None:
        v = v / ntrial
    s = np.sqrt(v)
    sigma = s[:, None] * omega * s[None, :]
    if var.kind == "poisson_tweedie":
        sigma = sigma + np.diag(np.asarray(mu, dtype=float))
    if not np.isfinite(sigma).all():
        raise NotPositiveDefinite("per-response covariance has non-finite entries")
    return sigma


def _chol(matrix, what):
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"{what} is not positive definite") from None


@dataclass(frozen=True)
class JointCovariance:
    """The NR x NR joint covariance with its cached Cholesky factors."""

    C: np.ndarray
    chol: np.ndarray
    sigma_chols: tuple
    sigma_b: np.ndarray

    @property
    def dim(self):
        return self.C.shape[0]


def build_joint_c(sigmas, rho):
    """Couple per-response covariances through the correlation matrix.

    Computes Bdiag(L_1..L_R) (Sigma_b kron I) Bdiag(L_1^T..L_R^T) where L_r
    is the lower Cholesky factor of the r-th covariance; block (r, s) is
    therefore Sigma_b[r, s] * L_r L_s^T and the diagonal blocks recover the
    per-response covariances exactly.
    """
    n_responses = len(sigmas)
    n = sigmas[0].shape[0]
    chols = []
    for r, sigma in enumerate(sigmas):
        chols.append(_chol(sigma, f"covariance of response {r + 1}"))
    sigma_b = correlation_matrix(np.asarray(rho, dtype=float), n_responses)
    _chol(sigma_b, "between-response correlation matrix")
    c = np.empty((n * n_responses, n * n_responses))
    for r in range(n_responses):
        for s in range(r, n_responses):
            block = sigma_b[r, s] * (chols[r] @ chols[s].T)
            c[r * n : (r + 1) * n, s * n : (s + 1) * n] = block
            if s != r:
                c[s * n : (s + 1) * n, r * n : (r + 1) * n] = block.T
    c = 0.5 * (c + c.T)
    chol = _chol(c, "joint covariance")
    return JointCovariance(C=c, chol=chol, sigma_chols=tuple(chols), sigma_b=sigma_b)


@dataclass(frozen=True)
class CovarianceModel:
    """C as a function of the dispersion parameters, at a fixed mean.

    Bundles the mean vectors, variance functions, trial counts and matrix
    predictors of every response so the estimator can rebuild C and its
    dispersion derivatives at arbitrary dispersion values.
    """

    mus: tuple
    variances: tuple
    ntrials: tuple
    z_lists: tuple

    @property
    def n_responses(self):
        return len(self.mus)

    @property
    def tau_lengths(self):
        return tuple(len(z) for z in self.z_lists)

    def sigma(self, r, tau_r):
        omega = build_omega(tau_r, self.z_lists[r])
        return build_sigma_r(self.mus[r], self.variances[r], omega, self.ntrials[r])

    def build(self, disp):
        sigmas = [self.sigma(r, disp.tau[r]) for r in range(self.n_responses)]
        return build_joint_c(sigmas, disp.rho)

    def derivatives(self, disp, joint=None):
        """dC/dlambda_i for every free dispersion parameter, in flat order.

        Correlation derivatives are exact (the correlation enters linearly
        through the Kronecker structure). For a single response the tau
        derivatives are the exact V^(1/2) Z_d V^(1/2); with several
        responses the tau derivatives go through the Cholesky factors, for
        which no closed form is used; they are central finite differences
        of the full C builder.
        """
        if joint is None:
            joint = self.build(disp)
        n_resp = self.n_responses
        n = len(self.mus[0])
        out = []
        chols = joint.sigma_chols
        for r, s in rho_pairs(n_resp):
            d = np.zeros_like(joint.C)
            block = chols[r] @ chols[s].T
            d[r * n : (r + 1) * n, s * n : (s + 1) * n] = block
            d[s * n : (s + 1) * n, r * n : (r + 1) * n] = block.T
            out.append(d)
        if n_resp == 1:
            v = variance_eval(self.variances[0], self.mus[0])
            if self.ntrials[0] is not None:
                v = v / self.ntrials[0]
            sqrt_v = np.sqrt(v)
            for z in self.z_lists[0]:
                out.append(sqrt_v[:, None] * z * sqrt_v[None, :])
            return out
        flat = disp.flatten()
        offset = len(disp.rho)
        for r in range(n_resp):
            for _ in range(len(disp.tau[r])):
                pos = offset
                offset += 1
                h = _FD_STEP * max(1.0, abs(flat[pos]))
                out.append(self._tau_difference(disp, joint, flat, pos, h))
        return out

    def _tau_difference(self, disp, joint, flat, pos, h):
        # One-sided fallback keeps boundary dispersion points usable.
        plus = flat.copy()
        plus[pos] += h
        minus = flat.copy()
        minus[pos] -= h
        c_plus = c_minus = None
        try:
            c_plus = self.build(disp.replace_flat(plus)).C
        except NotPositiveDefinite:
            pass
        try:
            c_minus = self.build(disp.replace_flat(minus)).C
        except NotPositiveDefinite:
            pass
        if c_plus is not None and c_minus is not None:
            deriv = (c_plus - c_minus) / (2.0 * h)
        elif c_plus is not None:
            deriv = (c_plus - joint.C) / h
        elif c_minus is not None:
            deriv = (joint.C - c_minus) / h
        else:
            raise NotPositiveDefinite(
                "covariance is not differentiable here; both dispersion "
                "perturbations left the positive-definite region"
            )
        return 0.5 * (deriv + deriv.T)

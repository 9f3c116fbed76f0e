"""Rate regions and their linear-minimization oracles.

Two families of achievable-rate regions are modelled, both of the
contra-polymatroid form {R >= 0 : sum_{i in B} R_i >= g(B) for all B}:

* lossless distributed compression of jointly Gaussian quantized sources,
  where g is the conditional entropy of a subset given its complement, and
* the quadratic Gaussian CEO problem, where for a fixed auxiliary vector r
  the rank is g_r(A) = sum_{k in A} r_k + half the log ratio of total to
  complement-side information.

Linear objectives over such regions are minimized exactly by a greedy chain
allocation along the weight order; the CEO case additionally optimizes the
auxiliary vector through a stationarity recursion with a one-dimensional
search on the distortion multiplier.

Units are nats throughout; subsets are bitmasks over source indices 0..n-1.
"""

import math

import numpy as np

LN_2PI_E = math.log(2.0 * math.pi * math.e)

#: exhaustive subset enumeration refuses to run above this many sources
EXHAUSTIVE_LIMIT = 12

#: auxiliary rates are capped here; (1 - exp(-2r)) is 1.0 to machine
#: precision long before, so the cap only matters for zero-weight sensors
R_CAP = 30.0


class RegionError(ValueError):
    """Invalid model, weights or rate vector for a region operation."""


def iter_masks(n):
    return range(1, 1 << n)


def mask_indices(mask, n):
    return [i for i in range(n) if mask >> i & 1]


# ---------------------------------------------------------------------------
# rank functions
# ---------------------------------------------------------------------------

class RankFunction:
    """Set function g over subsets of 0..n-1, accessed by bitmask.

    Subclasses implement ``_value``; results are cached (the greedy oracle
    and the exhaustive checkers revisit masks heavily).  Instances are
    immutable once constructed; the cache is a plain dict, so share across
    threads only after a warm-up pass or guard externally.
    """

    def __init__(self, n):
        self.n = int(n)
        self._cache = {}

    def value_mask(self, mask):
        if mask == 0:
            return 0.0
        got = self._cache.get(mask)
        if got is None:
            got = self._value(int(mask))
            self._cache[mask] = got
        return got

    def value(self, subset):
        mask = 0
        for i in subset:
            mask |= 1 << int(i)
        return self.value_mask(mask)

    def _value(self, mask):
        raise NotImplementedError

    def full_mask(self):
        return (1 << self.n) - 1

    def check_invariants(self, tol=1e-10):
        """Exhaustively verify g(0)=0, monotonicity and supermodularity.

        Only sensible for small ground sets (cost grows as 4^n).
        """
        if self.n > 8:
            raise RegionError("invariant enumeration limited to 8 sources")
        full = self.full_mask()
        for mask in iter_masks(self.n):
            for i in range(self.n):
                if mask >> i & 1:
                    low = self.value_mask(mask & ~(1 << i))
                    if low > self.value_mask(mask) + tol:
                        return False
        for a in range(full + 1):
            va = self.value_mask(a)
            for b in range(full + 1):
                if va + self.value_mask(b) > (
                        self.value_mask(a | b) + self.value_mask(a & b) + tol):
                    return False
        return True


class TabularRank(RankFunction):
    """Rank function given explicitly as {mask: value}; handy in tests."""

    def __init__(self, n, table):
        super().__init__(n)
        self._table = dict(table)

    def _value(self, mask):
        return float(self._table[mask])


class GaussianSourceModel:
    """Jointly Gaussian observations quantized with a common step.

    Entropies of the quantized sources are differential entropies of the
    underlying Gaussian minus log(step) per dimension, valid for steps small
    against the conditional spreads.
    """

    def __init__(self, covariance, delta):
        self.covariance = np.array(covariance, dtype=float)
        self.delta = float(delta)
        if self.delta <= 0:
            raise RegionError("quantization step must be positive")
        c = self.covariance
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise RegionError("covariance must be square")
        if not np.allclose(c, c.T, atol=1e-12):
            raise RegionError("covariance must be symmetric")
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise RegionError("covariance is not positive definite") from None

    @property
    def n(self):
        return self.covariance.shape[0]

    def to_dict(self):
        return {"type": "gaussian-sw", "covariance": self.covariance.tolist(),
                "delta": self.delta}


def _logdet_psub(cov, idx):
    """log det of the principal submatrix on idx; 0 for the empty set."""
    if not idx:
        return 0.0
    sub = cov[np.ix_(idx, idx)]
    try:
        chol = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        raise RegionError(
            "principal submatrix not positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def sw_conditional_entropy(model, subset):
    """H(X_B | X_{B^c}) in nats for quantized jointly Gaussian sources.

    For B the full index set this is the joint entropy.  Accepts an iterable
    of indices or a bitmask.
    """
    n = model.n
    mask = subset if isinstance(subset, int) else 0
    if not isinstance(subset, int):
        for i in subset:
            mask |= 1 << int(i)
    if mask == 0:
        return 0.0
    comp = [i for i in range(n) if not mask >> i & 1]
    size = n - len(comp)
    ld_all = _logdet_psub(model.covariance, list(range(n)))
    ld_comp = _logdet_psub(model.covariance, comp)
    return 0.5 * (size * LN_2PI_E + ld_all - ld_comp) \
        - size * math.log(model.delta)


class SwEntropyRank(RankFunction):
    """Conditional-entropy rank function of a Gaussian source model."""

    def __init__(self, model):
        super().__init__(model.n)
        self.model = model

    def _value(self, mask):
        return sw_conditional_entropy(self.model, mask)


class CeoModel:
    """Remote Gaussian source observed through independent Gaussian noise.

    ``sigma_x2`` is the source variance, ``noise_vars`` the per-sensor noise
    variances, ``distortion`` the mean-squared-error target.  Distortions at
    or above the source variance degenerate to the zero-rate region (the
    prior estimate already achieves them); anything below must satisfy the
    combined-information achievability bound.
    """

    def __init__(self, sigma_x2, noise_vars, distortion):
        self.sigma_x2 = float(sigma_x2)
        self.noise_vars = np.array(noise_vars, dtype=float)
        self.distortion = float(distortion)
        if self.sigma_x2 <= 0 or self.distortion <= 0:
            raise RegionError("variances and distortion must be positive")
        if np.any(self.noise_vars <= 0):
            raise RegionError("noise variances must be positive")
        slack = (1.0 / self.sigma_x2 + np.sum(1.0 / self.noise_vars)
                 - 1.0 / self.distortion)
        if slack < 0:
            raise RegionError(
                "distortion unreachable even with unbounded rates")

    @property
    def n(self):
        return self.noise_vars.size

    def to_dict(self):
        return {"type": "ceo", "sigma_x2": self.sigma_x2,
                "sigma_i2": self.noise_vars.tolist(),
                "D": self.distortion}


def ceo_rank(model, r, subset):
    """Rank value of the CEO region at auxiliary vector r for one subset."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise RegionError("auxiliary rates must be non-negative")
    n = model.n
    mask = subset if isinstance(subset, int) else 0
    if not isinstance(subset, int):
        for i in subset:
            mask |= 1 << int(i)
    if mask == 0:
        return 0.0
    phi = (1.0 - np.exp(-2.0 * r)) / model.noise_vars
    inv_x = 1.0 / model.sigma_x2
    inside = np.array([bool(mask >> i & 1) for i in range(n)])
    total = inv_x + float(np.sum(phi))
    comp = inv_x + float(np.sum(phi[~inside]))
    return float(np.sum(r[inside])) + 0.5 * math.log(total / comp)


class CeoRank(RankFunction):
    """CEO rank function with the auxiliary vector frozen."""

    def __init__(self, model, r):
        super().__init__(model.n)
        self.model = model
        self.r = np.array(r, dtype=float)

    def _value(self, mask):
        return ceo_rank(self.model, self.r, mask)


# ---------------------------------------------------------------------------
# greedy linear minimization
# ---------------------------------------------------------------------------

def greedy_min_linear(rank, weights):
    """Minimize weights'R over the region described by ``rank``.

    Sorts the weights in non-increasing order (ties broken by source index,
    stable) and assigns each source the marginal rank increment of its chain
    prefix.  The chain vertex this produces is an optimal extreme point for
    any non-negative weight vector.
    """
    w = np.asarray(weights, dtype=float)
    if w.size != rank.n:
        raise RegionError("weight vector length mismatch")
    if np.any(w < 0):
        raise RegionError("greedy allocation requires non-negative weights")
    order = np.argsort(-w, kind="stable")
    rates = np.zeros(rank.n)
    mask = 0
    prev = 0.0
    for i in order:
        mask |= 1 << int(i)
        cur = rank.value_mask(mask)
        rates[i] = cur - prev
        prev = cur
    return rates


class MembershipReport:
    def __init__(self, member, worst_mask, margin):
        self.member = member
        #: subset with the smallest (most violated) slack
        self.worst_mask = worst_mask
        #: min over subsets of sum_B R - g(B); negative when violated
        self.margin = margin

    def __bool__(self):
        return self.member


def region_membership(rank, rates, tol=1e-9, limit=EXHAUSTIVE_LIMIT):
    """Exhaustively check sum_B R >= g(B) - tol for every nonempty B."""
    if rank.n > limit:
        raise RegionError(f"membership enumeration limited to {limit}")
    rates = np.asarray(rates, dtype=float)
    worst_mask, worst = 0, np.inf
    for mask in iter_masks(rank.n):
        s = sum(rates[i] for i in range(rank.n) if mask >> i & 1)
        slack = s - rank.value_mask(mask)
        if slack < worst:
            worst, worst_mask = slack, mask
    return MembershipReport(bool(worst >= -tol), worst_mask, float(worst))


def tighten_sum_rate(rank, rates, tol=1e-9):
    """Reduce a region vector component-wise until the sum rate is tight.

    While the total exceeds g(full set), some index participates only in
    loose constraints (supermodularity forbids every index being pinned);
    the lowest such index is reduced until one of its constraints becomes
    tight.  The output stays in the region, never exceeds the input in any
    component, and its total equals g(full set).
    """
    n = rank.n
    if n > EXHAUSTIVE_LIMIT:
        raise RegionError("tightening requires exhaustive enumeration")
    rates = np.array(rates, dtype=float)
    report = region_membership(rank, rates, tol=tol)
    if not report:
        raise RegionError(
            f"input not in region (violated mask {report.worst_mask:b})")
    full = rank.full_mask()
    g_full = rank.value_mask(full)
    for _ in range(1 << (n + 2)):
        if float(np.sum(rates)) <= g_full + tol:
            break
        subset_sums = {}
        tight_members = 0
        for mask in iter_masks(n):
            s = sum(rates[i] for i in range(n) if mask >> i & 1)
            subset_sums[mask] = s
            if s - rank.value_mask(mask) <= tol:
                tight_members |= mask
        j = next((i for i in range(n) if not tight_members >> i & 1), None)
        if j is None:  # cannot happen for a supermodular rank
            raise RegionError("no loose index found while sum rate is loose")
        floor = 0.0
        for mask in iter_masks(n):
            if mask >> j & 1:
                need = rank.value_mask(mask) - (subset_sums[mask] - rates[j])
                floor = max(floor, need)
        rates[j] = floor
    return rates


# ---------------------------------------------------------------------------
# CEO linear minimization (auxiliary-vector optimization)
# ---------------------------------------------------------------------------

class CeoLinMin:
    """Result of minimizing w'R over the full CEO region.

    ``value`` is -inf (and r/rates None) when any weight is negative, since
    the region imposes no upper bounds on individual rates.
    """

    def __init__(self, value, r=None, rates=None, nu=None, warning=False):
        self.value = value
        self.r = r
        self.rates = rates
        self.nu = nu
        #: True when a stationarity denominator had to be clamped
        self.conditioning_warning = warning

    @property
    def unbounded(self):
        return self.value == -np.inf


def _ceo_recursion(model, ws, sig2, nu):
    """Auxiliary rates solving the stationarity equations at multiplier nu.

    Weights must be sorted non-increasing.  Returns (r_sorted, total
    information, clamp warning).  Denominators of the weight-difference
    correction are clamped at 1e-12 when the running information overshoots
    the distortion budget.
    """
    n = ws.size
    inv_d = 1.0 / model.distortion
    r = np.zeros(n)
    corr = 0.0
    used = 1.0 / model.sigma_x2
    warn = False
    for k in range(n):
        wk = ws[k]
        if wk <= 0.0:
            rk = R_CAP
        else:
            arg = (2.0 * nu - corr) / (wk * sig2[k])
            rk = 0.5 * math.log(arg) if arg > 1.0 else 0.0
            if rk > R_CAP:
                rk = R_CAP
        r[k] = rk
        used += (1.0 - math.exp(-2.0 * rk)) / sig2[k]
        if k < n - 1:
            # 1/D minus the information accumulated over the weight prefix,
            # the denominator the stationarity equations divide by
            dk = inv_d - (used - 1.0 / model.sigma_x2)
            if dk < 1e-12:
                dk = 1e-12
                warn = True
            corr += (ws[k + 1] - wk) / dk
    return r, used, warn


def ceo_min_linear(model, weights, tol=1e-10):
    """Minimize weights'R over the union-of-regions CEO rate set.

    Negative weights make the problem unbounded below.  Otherwise the
    distortion constraint is active at the optimum, the stationarity
    recursion yields the auxiliary vector for a given multiplier nu, and nu
    is located by bisection on the information residual (monotone in nu);
    if bracketing fails numerically a log-grid scan refines instead.
    """
    w = np.asarray(weights, dtype=float)
    if w.size != model.n:
        raise RegionError("weight vector length mismatch")
    if np.any(w < 0):
        return CeoLinMin(-np.inf)
    n = model.n
    order = np.argsort(-w, kind="stable")
    ws = w[order]
    sig2 = model.noise_vars[order]
    inv_x = 1.0 / model.sigma_x2
    inv_d = 1.0 / model.distortion
    need = inv_d - inv_x
    if need <= 0:
        # the prior estimate already meets the distortion: zero rates
        return CeoLinMin(0.0, r=np.zeros(n), rates=np.zeros(n), nu=0.0)

    def residual(nu):
        r, used, warn = _ceo_recursion(model, ws, sig2, nu)
        return used - inv_d, r, warn

    # the multiplier of the (substituted) tight distortion constraint is
    # free-signed: unequal weights can push the root below zero, so the
    # bracket expands on both sides; the residual is non-decreasing in nu
    lo = 1e-12
    res_lo, _, _ = residual(lo)
    grow = 0
    while res_lo > 0 and grow < 300:
        lo = -max(1.0, float(np.max(ws * sig2))) if lo > 0 else lo * 4.0
        res_lo, _, _ = residual(lo)
        grow += 1
    hi = max(1.0, float(np.max(ws * sig2)))
    res_hi, _, _ = residual(hi)
    grow = 0
    while res_hi < 0 and grow < 300:
        hi *= 4.0
        res_hi, _, _ = residual(hi)
        grow += 1
    if res_lo > 0 or res_hi < 0:
        # no sign change: fall back to a dense grid scan between the ends
        grid = np.concatenate([
            -np.logspace(math.log10(max(abs(lo), 1e-12)), -12, 5000),
            np.logspace(-12, math.log10(max(hi, 1e-11)), 5000)])
        vals = [abs(residual(nu)[0]) for nu in grid]
        best = int(np.argmin(vals))
        lo = grid[max(0, best - 1)]
        hi = grid[min(len(grid) - 1, best + 1)]
    nu_best, gap_best = lo, abs(res_lo)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        res_mid, _, _ = residual(mid)
        if abs(res_mid) < gap_best:
            nu_best, gap_best = mid, abs(res_mid)
        if abs(res_mid) <= tol and gap_best <= tol:
            break
        if res_mid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    r_sorted, used, warn = _ceo_recursion(model, ws, sig2, nu_best)

    # greedy chain rates on the rank at r*, evaluated with prefix sums
    phi = (1.0 - np.exp(-2.0 * r_sorted)) / sig2
    total = inv_x + float(np.sum(phi))
    suffix = np.concatenate([np.cumsum(phi[::-1])[::-1][1:], [0.0]])
    chain = np.cumsum(r_sorted) + 0.5 * (
        np.log(total) - np.log(inv_x + suffix))
    rates_sorted = np.diff(np.concatenate([[0.0], chain]))
    r = np.zeros(n)
    rates = np.zeros(n)
    r[order] = r_sorted
    rates[order] = rates_sorted
    value = float(w @ rates)
    return CeoLinMin(value, r=r, rates=rates, nu=float(nu_best),
                     warning=warn)


def ceo_stationarity_residuals(model, weights, r, nu):
    """First-order residuals of the auxiliary-vector optimality system.

    Zero entries of r are checked for the one-sided (projected) condition;
    positive entries for the full stationarity equation.
    """
    w = np.asarray(weights, dtype=float)
    order = np.argsort(-w, kind="stable")
    ws = w[order]
    sig2 = model.noise_vars[order]
    rs = np.asarray(r, dtype=float)[order]
    inv_d = 1.0 / model.distortion
    out = np.zeros(model.n)
    corr = 0.0
    acc = 0.0
    for k in range(model.n):
        e2 = math.exp(-2.0 * rs[k])
        grad = ws[k] - 2.0 * nu * e2 / sig2[k] + e2 / sig2[k] * corr
        out[k] = abs(grad) if rs[k] > 0 else max(0.0, -grad)
        acc += (1.0 - e2) / sig2[k]
        if k < model.n - 1:
            dk = max(inv_d - acc, 1e-12)
            corr += (ws[k + 1] - ws[k]) / dk
    return out


def ceo_distortion_residual(model, r):
    """Distortion-constraint residual at r (zero when exactly tight)."""
    phi = (1.0 - np.exp(-2.0 * np.asarray(r, dtype=float))) \
        / model.noise_vars
    return 1.0 / model.sigma_x2 + float(np.sum(phi)) - 1.0 / model.distortion


# ---------------------------------------------------------------------------
# model file format
# ---------------------------------------------------------------------------

def model_from_dict(data, source_coords=None):
    """Build a source model from its JSON dict form.

    The coordinate-correlation variant needs the source coordinates of the
    owning instance, supplied by the caller.
    """
    kind = data.get("type")
    if kind == "gaussian-sw":
        if "covariance" in data:
            return GaussianSourceModel(data["covariance"], data["delta"])
        if source_coords is None:
            raise RegionError(
                "coordinate-based model needs source coordinates")
        from . import scenario

        cov = scenario.gaussian_covariance(
            source_coords, data["sigma2"], data["c"], data["beta"])
        return GaussianSourceModel(cov, data["delta"])
    if kind == "ceo":
        return CeoModel(data["sigma_x2"], data["sigma_i2"], data["D"])
    raise RegionError(f"unknown model type {kind!r}")

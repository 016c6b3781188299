"""Log-log rate fitting shared by the static and sweep studies."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    width: float        # two standard errors of the slope
    rms: float          # rms residual of the log-log fit
    n_used: int
    discarded: tuple = ()

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "width": self.width,
                "rms": self.rms, "n_used": self.n_used, "discarded": list(self.discarded)}


def _ols(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    n = len(x)
    if n > 2:
        s2 = np.sum(res**2) / (n - 2)
        se = np.sqrt(s2 / np.sum((x - x.mean()) ** 2))
    else:
        se = np.inf
    return coef[0], coef[1], res, se


def fit_rate(eps, err, discard=True, factor=3.0, floor=1e-3):
    """Least-squares slope of ln(err) against ln(eps).

    With ``discard`` the largest eps is dropped when its residual against the
    fit of the remaining points exceeds ``factor`` times that fit's rms
    residual (and the absolute ``floor`` in log units), which removes
    pre-asymptotic points.  The leave-one-out residual is used because an
    outlier at the end of the range drags the full fit toward itself.
    """
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    if eps.shape != err.shape or eps.size < 3:
        raise ValueError("fit_rate needs at least 3 (eps, error) pairs")
    if np.any(eps <= 0) or np.any(err <= 0):
        raise ValueError("fit_rate needs positive eps and errors")
    order = np.argsort(eps)
    x, y = np.log(eps[order]), np.log(err[order])
    slope, icpt, res, se = _ols(x, y)
    dropped = ()
    if discard and x.size >= 4:
        s_r, i_r, res_r, se_r = _ols(x[:-1], y[:-1])
        rms_rest = np.sqrt(np.mean(res_r**2))
        if abs(y[-1] - (s_r * x[-1] + i_r)) > max(factor * rms_rest, floor):
            dropped = (float(eps[order][-1]),)
            slope, icpt, res, se = s_r, i_r, res_r, se_r
            x = x[:-1]
    rms = float(np.sqrt(np.mean(res**2)))
    return RateFit(float(slope), float(icpt), float(2 * se), rms, int(x.size), dropped)

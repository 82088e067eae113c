"""
Walking a lasso path with LARS
==============================

Build a small regression, trace the whole lasso path and look at the order
in which variables enter. Then add an elastic-net ridge weight and stop the
path early, the way a random experiment of the selector does.
"""
import numpy as np

from trexpca.lars_path import PathProblem, lars_lasso_path, standardize_columns, terminated_path

rng = np.random.default_rng(0)
n, p = 40, 8
X = standardize_columns(rng.standard_normal((n, p)))
beta = np.zeros(p)
beta[[1, 4]] = [3.0, -2.0]
y = X @ beta + 0.5 * rng.standard_normal(n)
y -= y.mean()

path = lars_lasso_path(PathProblem(X, y))
print("entry order:", path.entry_order)
print("breakpoints:", path.n_steps)
for lam, coef in zip(path.lambdas[:4], path.coef_path[:4]):
    print(f"  lambda={lam:7.3f}  coef={np.round(coef, 3)}")

# at the end of the path the lasso solution is least squares
ols = np.linalg.lstsq(X, y, rcond=None)[0]
print("max |end of path - OLS|:", np.abs(path.coefficients - ols).max())

# %%
# Stop once two of three appended noise columns have entered.
dummies = standardize_columns(rng.standard_normal((n, 3)))
aug = np.hstack([X, dummies])
cand = terminated_path(PathProblem(aug, y, dummy_flags=np.r_[np.zeros(p, bool), np.ones(3, bool)], ridge_weight=1.0), T=2)
print("originals before the 1st dummy:", cand.candidates(1))
print("originals before the 2nd dummy:", cand.candidates(2))

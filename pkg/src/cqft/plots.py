"""Figure rendering for the report paths; every plot lands next to its CSV."""

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_partition(partition, path):
    freqs = np.abs(partition.system.grid.frequencies())
    order = np.argsort(freqs)
    fig, ax = plt.subplots(figsize=(7, 4))
    for j in partition.system.scales:
        ax.plot(freqs[order], partition.chi_on_grid(j)[order], lw=1,
                label=f"j={j}" if j in (partition.system.j_min, partition.system.j_max) else None)
    total = partition.partition_sum(freqs[order])
    ax.plot(freqs[order], total, "k--", lw=1, label="sum")
    ax.set_xscale("log")
    ax.set_xlabel(r"$|\xi|$")
    ax.set_ylabel("window value")
    ax.set_title("Scale windows and their sum")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_slices(sliced, path, max_slices=6):
    lags = sliced.system.grid.sym_lags()
    order = np.argsort(lags)
    fig, ax = plt.subplots(figsize=(7, 4))
    scales = list(sliced.system.scales)[-max_slices:]
    for j in scales:
        ax.plot(lags[order], sliced.slices[j][order], lw=1, label=f"j={j}")
    ax.set_xlabel("x")
    ax.set_ylabel("kernel")
    ax.set_title("Scale-sliced covariance kernels")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_flow(state, path):
    has_ct = state.delta_m2_scaled is not None
    fig, axes = plt.subplots(1, 3 if has_ct else 1, figsize=(10, 3.2),
                             squeeze=False)
    js = np.arange(len(state.lambdas))
    ax = axes[0][0]
    ax.loglog(js[1:], state.lambdas[1:], lw=1)
    ax.set_xlabel("j")
    ax.set_ylabel(r"$\lambda_j$")
    ax.set_title("coupling flow")
    if has_ct:
        k = np.arange(len(state.delta_m2_scaled))
        axes[0][1].semilogy(k[1:], state.delta_m2_scaled[1:], lw=1)
        axes[0][1].set_title(r"mass counterterm $\times M^{2j}$")
        axes[0][1].set_xlabel("j")
        axes[0][2].plot(k[1:], state.delta_z3[1:], lw=1)
        axes[0][2].set_title("wave-function counterterm")
        axes[0][2].set_xlabel("j")
    return _save(fig, path)


def plot_cq(results, path):
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for alpha, res in sorted(results.items()):
        ax.errorbar(res.levels, np.log2(res.variances),
                    yerr=res.stderrs / res.variances / math.log(2),
                    marker="o", ms=3, lw=1,
                    label=rf"$\alpha$={alpha} (slope {res.slope:.2f})")
    ax.set_xlabel("refinement level L")
    ax.set_ylabel(r"$\log_2$ Var(area)")
    ax.set_title("Dyadic area variance vs level")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_bubble(results, path):
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for res in results:
        ax.plot(res.rhos, res.log_values, marker="o", ms=3, lw=1,
                label=rf"$\alpha$={res.alpha}: slope {res.slope:.3f}")
    ax.set_xlabel(r"cutoff scale $\rho$")
    ax.set_ylabel(r"$\log_M$ bubble")
    ax.set_title("Bubble growth against the cutoff")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_domination(reports, path):
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for rep in reports:
        ax.loglog(rep.lams, rep.sup_values, marker="o", ms=4, lw=1,
                  label=f"{rep.kind}: slope {rep.measured_slope:.3f} "
                        f"(claimed {rep.claimed_slope:.3f})")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("maximized profile")
    ax.set_title("Domination scaling")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_sigma_propagator(props, path):
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    rhos = [p.rho for p in props]
    ax.semilogy(rhos, [p.closed_form for p in props], marker="o", ms=4, lw=1)
    ax.set_xlabel(r"cutoff $\rho$")
    ax.set_ylabel("renormalized propagator")
    ax.set_title("Mass screening of the auxiliary field")
    return _save(fig, path)


def plot_increment_variance(report, path):
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    ax.loglog(report.separations, report.increment_variances, marker="o", ms=4,
              lw=1, label=f"fit exponent {report.fitted_exponent:.3f}")
    ref = report.increment_variances[-1] * (
        report.separations / report.separations[-1]) ** (4 * report.alpha)
    ax.loglog(report.separations, ref, "k--", lw=1,
              label=rf"$\delta^{{4\alpha}}$ reference")
    ax.set_xlabel(r"separation $\delta$")
    ax.set_ylabel("Var(increment)")
    ax.set_title("Renormalized-area regularity")
    ax.legend(fontsize=8)
    return _save(fig, path)

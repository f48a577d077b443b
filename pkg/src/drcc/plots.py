"""Figure rendering for the CLI report paths.

Each function takes the same row records the CSV emitters consume and
writes a PNG next to them.  Rendering is headless; nothing here opens a
window.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_schedules(records, path):
    """Per-method schedule curves against the sample count."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    by_method = {}
    for row in records:
        by_method.setdefault(row["method"], []).append(row)
    for method, rows in by_method.items():
        xs, ys = [], []
        for row in rows:
            if not row["feasible"]:
                continue
            if row["kappa"] is not None and row["phi"] is not None:
                value = row["kappa"] * row["phi"] ** 0.5
            elif row["phi"] is not None:
                value = row["phi"]
            else:
                continue
            xs.append(row["n"])
            ys.append(value)
        if xs:
            ax.plot(xs, ys, marker=".", label=method)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("samples N")
    ax.set_ylabel("shrink factor (kappa sqrt(phi), or phi)")
    ax.set_title("sample-size schedule coefficients")
    ax.grid(True, which="both", alpha=0.3)
    if by_method:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_constants(records, path):
    """Comparison-constant curves over the risk-level grid."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    alphas = [row["alpha"] for row in records]
    for key in ("general", "independent", "gaussian"):
        ax.plot(alphas, [row[key] for row in records], label=key)
    ax.set_xlabel("alpha")
    ax.set_ylabel("safety constant")
    ax.set_title("distribution-family constants")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_bench(rows, alpha, path):
    """Aggregate reward and worst violation against the sample count."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 7.0), sharex=True)
    by_method = {}
    for row in rows:
        by_method.setdefault(row.method, []).append(row)
    for method, group in by_method.items():
        ns = [r.n for r in group]
        top.plot(ns, [r.avg_reward for r in group], marker="o", label=method)
        bottom.plot(ns, [r.max_violation for r in group], marker="o",
                    label=method)
    top.set_ylabel("average test reward")
    top.grid(True, which="both", alpha=0.3)
    top.legend()
    bottom.axhline(alpha, linestyle="--", color="black", linewidth=1,
                   label="risk budget")
    bottom.set_xscale("log")
    bottom.set_xlabel("training samples N")
    bottom.set_ylabel("worst empirical violation")
    bottom.grid(True, which="both", alpha=0.3)
    bottom.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_sequential(rows, path):
    """Per-step wall time of the streaming re-solve loop."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot([r.step for r in rows], [r.time_ms for r in rows], marker=".")
    ax.set_xlabel("step")
    ax.set_ylabel("update + solve time (ms)")
    ax.set_title("sequential re-solve cost per step")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

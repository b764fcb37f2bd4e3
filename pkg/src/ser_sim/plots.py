import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ser_sim.stats import awgn_ser_oracle, db_to_linear  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids and no timestamp keep repeated SVG output identical
plt.rcParams["svg.hashsalt"] = "lora-dts"
_SVG_METADATA = {"Date": None}


def _save(fig, filepath):
    fig.savefig(filepath, format="svg", metadata=_SVG_METADATA, bbox_inches="tight")
    plt.close(fig)
    logger.info(f"Written plot to {filepath}")


def _positive(values):
    # log axes cannot show zero error rates
    return np.where(values > 0, values, np.nan)


def plot_ser_vs_esn0(table: pd.DataFrame, filepath="ser_vs_esn0.svg"):
    """
    SER against Es/N0, one curve per estimator and one panel per spreading
    factor, with the Doppler-free AWGN curve as reference.
    """
    table = table[table["error"].isna()].sort_values("esn0_db")
    sfs = sorted(table["sf"].dropna().unique())
    fig, axes = plt.subplots(
        1, max(len(sfs), 1), figsize=(5 * max(len(sfs), 1), 4), squeeze=False
    )
    for ax, sf in zip(axes[0], sfs):
        panel = table[table["sf"] == sf]
        for estimator, curve in panel.groupby("estimator", sort=True):
            for ldro, sub in curve.groupby("ldro", sort=True):
                label = f"{estimator} (LDRO)" if ldro else estimator
                ax.semilogy(
                    sub["esn0_db"], _positive(sub["ser"].to_numpy()), marker="o", label=label
                )
        esn0 = np.linspace(panel["esn0_db"].min(), panel["esn0_db"].max(), 50)
        reference = [awgn_ser_oracle(2 ** int(sf), g) for g in db_to_linear(esn0)]
        ax.semilogy(esn0, _positive(np.asarray(reference)), "k--", label="w/o Doppler")
        ax.set_title(f"SF{int(sf)}")
        ax.set_xlabel("Es/N0 [dB]")
        ax.set_ylabel("SER")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize="small")
    _save(fig, filepath)


def plot_ser_vs_axis(table: pd.DataFrame, axis: str, filepath=None):
    """SER against any swept axis, one curve per estimator."""
    filepath = filepath or f"ser_vs_{axis}.svg"
    table = table[table["error"].isna()].sort_values(axis)
    fig, ax = plt.subplots(figsize=(6, 4))
    for estimator, curve in table.groupby("estimator", sort=True):
        ax.semilogy(curve[axis], _positive(curve["ser"].to_numpy()), marker="o", label=estimator)
    ax.set_xlabel(axis)
    ax.set_ylabel("SER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    _save(fig, filepath)


def plot_doppler_profile(profile_table: pd.DataFrame, filepath="doppler_profile.svg"):
    """Doppler shift and rate over the pass on two y-axes."""
    fig, ax_shift = plt.subplots(figsize=(7, 4))
    ax_rate = ax_shift.twinx()
    t = profile_table["t_s"]
    ax_shift.plot(t, profile_table["doppler_shift_hz"] / 1e3, color="tab:blue")
    ax_rate.plot(t, profile_table["doppler_rate_hz_per_s"], color="tab:red")
    ax_shift.set_xlabel("t [s]")
    ax_shift.set_ylabel("Doppler shift [kHz]", color="tab:blue")
    ax_rate.set_ylabel("Doppler rate [Hz/s]", color="tab:red")
    ax_shift.grid(True, alpha=0.3)
    _save(fig, filepath)

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd


def plot_robustness_curves(
    df: pd.DataFrame,
    x: str,
    title: str | None = None,
    figsize: tuple[float, float] = (6, 4),
) -> plt.Figure:
    """Plot watermark WER/CER/BER and clean CER over an attack-strength column, in percent."""
    fig, ax = plt.subplots(figsize=figsize)
    for column, label, style in [
        ("wm_wer", "watermark WER", "o-"),
        ("wm_cer", "watermark CER", "s-"),
        ("ber", "BER", "^-"),
        ("clean_cer", "clean CER", "x--"),
    ]:
        ax.plot(df[x], 100 * df[column], style, label=label)
    ax.set_xlabel(x)
    ax.set_ylabel("%")
    ax.set_ylim(bottom=0)
    ax.legend()
    if title is not None:
        ax.set_title(title)
    plt.tight_layout()
    return fig

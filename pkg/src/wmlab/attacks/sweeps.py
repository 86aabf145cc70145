"""Robustness curves: watermark survival and clean accuracy over an attack-strength grid."""

import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from wmlab.attacks.finetuning import finetune_attack
from wmlab.attacks.harness import AttackHarness
from wmlab.attacks.report import AttackKind, AttackReport
from wmlab.utils.misc import derive_seed

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["clean_wer", "clean_cer", "wm_wer", "wm_cer", "ber", "watermarked"]


def _row(report: AttackReport) -> dict[str, float | bool]:
    extraction = report.extraction
    return {
        "clean_wer": report.clean_after.wer,
        "clean_cer": report.clean_after.cer,
        "wm_wer": extraction.wer,
        "wm_cer": extraction.cer,
        "ber": np.nan if extraction.ber is None else extraction.ber,
        "watermarked": extraction.watermarked,
    }


def prune_sweep(
    harness: AttackHarness,
    sparsities: Sequence[float],
    recovery_epochs: int = 3,
    show_progress: bool = False,
) -> pd.DataFrame:
    rows = []
    for sparsity in tqdm(sparsities, desc="Sparsity", disable=not show_progress):
        report = harness.prune(sparsity, epochs=recovery_epochs).report
        rows.append({"sparsity": sparsity, **_row(report)})
    return pd.DataFrame(rows, columns=["sparsity", *SWEEP_COLUMNS])


def finetune_sweep(
    harness: AttackHarness,
    epoch_grid: Sequence[int],
    show_progress: bool = False,
) -> pd.DataFrame:
    """Fine-tunes incrementally, evaluating the model after the cumulative number of epochs of each grid point."""
    rows = []
    model = harness.model
    done = 0
    for epochs in tqdm(sorted(set(epoch_grid)), desc="Epochs", disable=not show_progress):
        if epochs > done:
            model = finetune_attack(
                model,
                harness.attacker_data,
                epochs=epochs - done,
                original_lr=harness.original_lr,
                lr_ratio=harness.lr_ratio,
                seed=derive_seed(harness.seed, f"sweep-finetune-{epochs}"),
            ).model
            done = epochs
        report = harness.report_for_model(AttackKind.FINETUNE, {"epochs": epochs}, model)
        rows.append({"epochs": epochs, **_row(report)})
    return pd.DataFrame(rows, columns=["epochs", *SWEEP_COLUMNS])

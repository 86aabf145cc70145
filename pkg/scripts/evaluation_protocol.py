from pathlib import Path

from jsonargparse import CLI
from sensai.util import logging
from termcolor import colored

from wmlab.attacks.report import AttackKind, AttackReport
from wmlab.cli import load_experiment_config
from wmlab.config import get_config
from wmlab.lab import WatermarkLab
from wmlab.utils.argparse import HandleFlagsArgumentParser

log = logging.getLogger(__name__)


def print_green(text: str) -> None:
    print(colored(text, "green"))


def print_red(text: str) -> None:
    print(colored(text, "red"))


def _print_attack(name: str, report: AttackReport) -> None:
    line = (
        f"{name}: watermark survived={report.watermark_survived}, "
        f"clean CER {report.clean_before.cer:.4f} -> {report.clean_after.cer:.4f}"
    )
    (print_green if report.watermark_survived else print_red)(line)


def evaluation_protocol(
    config: str | None = None,
    seed: int | None = None,
    out: str | None = None,
    skip_sweeps: bool = False,
    show_progress: bool = False,
) -> None:
    """Runs the complete evaluation in one output directory: the embedding pipeline with its fidelity
    report, the integrity check, every robustness attack (including the label-detection negative
    control with all stegos intercepted), the robustness sweeps and the summary table.

    :param config: experiment configuration; the project default if None
    :param seed: overrides the global seed of the configuration
    :param out: output directory; a timestamped directory below the results directory if None
    :param skip_sweeps: if True, the pruning and fine-tuning sweeps are skipped
    :param show_progress: if True, progress bars are shown
    """
    cfg = load_experiment_config(config).with_seed(seed)
    if out is None and cfg.output_dir is None:
        out = str(Path(get_config().results_dir()) / logging.datetime_tag())
    out_dir = get_config().resolve_output_dir(out, cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logging.add_file_logger(str(out_dir / "run.log"))
    lab = WatermarkLab(cfg, out_dir, show_progress=show_progress)

    extraction = lab.run_pipeline()
    (print_green if extraction.succeeded else print_red)(
        f"Extraction: {extraction.verdict}, BER {extraction.ber}"
    )

    integrity = lab.integrity()
    (print_red if integrity.any_watermarked else print_green)(
        f"Integrity: {sum(r.watermarked for r in integrity.reports)} of {len(integrity.reports)} "
        "unmarked models judged watermarked"
    )

    sparsity = 0.5
    _print_attack("prune", lab.attack(AttackKind.PRUNE, sparsity=sparsity))
    _print_attack("finetune", lab.attack(AttackKind.FINETUNE))
    _print_attack("overwrite", lab.attack(AttackKind.OVERWRITE))
    _print_attack("evasion", lab.attack(AttackKind.LABEL_DETECTION))
    _print_attack(
        "evasion (all stegos intercepted)",
        lab.attack(AttackKind.LABEL_DETECTION, intercepted=cfg.watermark.n),
    )
    _print_attack("steganalysis", lab.attack(AttackKind.STEGANALYSIS))

    if not skip_sweeps:
        lab.sweep(AttackKind.PRUNE)
        lab.sweep(AttackKind.FINETUNE)

    print(lab.report().to_string(index=False))
    log.info(f"All artifacts were written to {out_dir}")


if __name__ == "__main__":
    logging.configure(level=logging.INFO)
    CLI(evaluation_protocol, parser_class=HandleFlagsArgumentParser)

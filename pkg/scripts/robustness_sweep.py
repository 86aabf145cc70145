from jsonargparse import CLI
from sensai.util import logging
from termcolor import colored

from wmlab.attacks.report import AttackKind
from wmlab.cli import load_run_config
from wmlab.lab import WatermarkLab
from wmlab.utils.argparse import HandleFlagsArgumentParser


def robustness_sweep(
    out: str,
    config: str | None = None,
    seed: int | None = None,
    model: str | None = None,
    skip_prune: bool = False,
    skip_finetune: bool = False,
    show_progress: bool = False,
) -> None:
    """Robustness curves of an embedded watermark over the configured pruning and fine-tuning grids.

    Expects an output directory in which the pipeline has run up to ``embed``; the tables and figures
    are written to its ``reports`` directory.

    :param out: output directory of the run to attack
    :param config: experiment configuration; the one stored by datagen in `out` if None
    :param seed: overrides the global seed of the configuration
    :param model: checkpoint to attack; the watermarked model if None
    :param skip_prune: if True, the pruning sweep is skipped
    :param skip_finetune: if True, the fine-tuning sweep is skipped
    :param show_progress: if True, progress bars are shown
    """
    cfg, out_dir = load_run_config(config, out)
    cfg = cfg.with_seed(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    logging.add_file_logger(str(out_dir / "run.log"))
    lab = WatermarkLab(cfg, out_dir, show_progress=show_progress)
    kinds = [
        kind
        for kind, skip in [(AttackKind.PRUNE, skip_prune), (AttackKind.FINETUNE, skip_finetune)]
        if not skip
    ]
    for kind in kinds:
        df = lab.sweep(kind, model)
        print(colored(f"{kind.value} sweep", "green"))
        print(df.to_string(index=False))


if __name__ == "__main__":
    logging.configure(level=logging.INFO)
    CLI(robustness_sweep, parser_class=HandleFlagsArgumentParser)

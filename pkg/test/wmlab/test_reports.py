from pathlib import Path

import pytest

from wmlab.reports import (
    format_value,
    read_report,
    render_report,
    summary_table,
    without_timestamp,
    write_report,
)
from wmlab.utils.argparse import HandleFlagsArgumentParser, expand_boolean_flags
from wmlab.utils.io import ResultWriter


class TestFormatValue:
    @pytest.mark.parametrize(
        ("value", "expected"),
        [
            (None, "none"),
            (True, "true"),
            (False, "false"),
            (0.25, "0.250000"),
            (1 / 3, "0.333333"),
            (7, "7"),
            ([0.1, 2], "0.100000,2"),
            ("two\nlines", "two lines"),
        ],
    )
    def test_values(self, value: object, expected: str) -> None:
        assert format_value(value) == expected


class TestReports:
    def test_render_flattens_nested_keys(self) -> None:
        text = render_report(
            {"verdict": "watermarked", "scores": {"wer": 0.1, "cer": None}}, timestamp="T"
        )
        assert text == "timestamp=T\nverdict=watermarked\nscores.wer=0.100000\nscores.cer=none\n"

    def test_without_timestamp(self) -> None:
        first = render_report({"ber": 0.0}, timestamp="2026-01-01T00:00:00")
        second = render_report({"ber": 0.0})
        assert without_timestamp(first) == without_timestamp(second) == "ber=0.000000\n"

    def test_write_and_read(self, tmp_path: Path) -> None:
        writer = ResultWriter(str(tmp_path))
        path = write_report(writer, "extraction", {"verdict": "not_watermarked", "ber": None})
        assert Path(path).name == "extraction.txt"
        report = read_report(path)
        assert report["verdict"] == "not_watermarked"
        assert report["ber"] == "none"
        assert "timestamp" in report

    def test_summary_table_drops_empty_columns(self, tmp_path: Path) -> None:
        writer = ResultWriter(str(tmp_path))
        paths = [
            write_report(writer, "first", {"verdict": "watermarked", "ber": 0.0}),
            write_report(writer, "second", {"verdict": "not_watermarked"}),
        ]
        df = summary_table(paths, keys=["verdict", "ber", "wer"])
        assert list(df.columns) == ["report", "verdict", "ber"]
        assert list(df["report"]) == ["first", "second"]
        assert list(df["ber"]) == ["0.000000", ""]


class TestExpandBooleanFlags:
    def test_bare_flags_get_a_value(self) -> None:
        args = ["--sweep", "--epochs", "3", "--show-progress"]
        assert expand_boolean_flags(args, {"show_progress", "sweep"}) == [
            "--sweep",
            "True",
            "--epochs",
            "3",
            "--show-progress",
            "True",
        ]

    def test_explicit_values_are_kept(self) -> None:
        assert expand_boolean_flags(["--sweep=False"], {"sweep"}) == ["--sweep=False"]

    def test_other_options_are_untouched(self) -> None:
        assert expand_boolean_flags(["--seed", "3"], {"sweep"}) == ["--seed", "3"]


class TestHandleFlagsArgumentParser:
    def test_bare_flag_sets_true(self) -> None:
        def sweep(out: str, skip_prune: bool = False, seed: int = 0) -> None:
            pass

        parser = HandleFlagsArgumentParser()
        parser.add_function_arguments(sweep)
        cfg = parser.parse_args(["--out", "run", "--skip_prune", "--seed", "2"])
        assert cfg.skip_prune is True
        assert cfg.seed == 2
        assert parser.parse_args(["--out", "run"]).skip_prune is False

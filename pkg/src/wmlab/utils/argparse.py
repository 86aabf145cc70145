import sys
from collections.abc import Collection, Sequence
from typing import Any

from jsonargparse import ArgumentParser
from overrides import override


def expand_boolean_flags(args: Sequence[str], flags: Collection[str]) -> list[str]:
    """Appends an explicit ``True`` to every bare ``--name`` that names one of `flags`.

    >>> expand_boolean_flags(["--show_progress", "--epochs", "3"], {"show_progress"})
    ['--show_progress', 'True', '--epochs', '3']
    """
    result = []
    for arg in args:
        result.append(arg)
        if arg.startswith("--") and "=" not in arg and arg[2:].replace("-", "_") in flags:
            result.append("True")
    return result


class HandleFlagsArgumentParser(ArgumentParser):
    """Lets keyword arguments of script entry points that default to False act as flags with `CLI`,
    e.g. ``--show_progress`` instead of ``--show_progress True``.
    """

    @override
    def parse_args(  # type: ignore[override]
        self, args: Sequence[str] | None = None, *other: Any, **kwargs: Any
    ) -> Any:
        flags = {action.dest for action in self._actions if action.default is False}
        args = sys.argv[1:] if args is None else args
        return super().parse_args(expand_boolean_flags(args, flags), *other, **kwargs)

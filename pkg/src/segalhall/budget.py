"""Work budget accounting.

Long-running commands meter their groupoid-level work (objects enumerated,
hom-sets computed) against an optional global budget so that a CLI call on an
oversized instance fails fast and loudly instead of grinding.  The budget is
process-global by design: the CLI sets it once per invocation.
"""

from __future__ import annotations


class BudgetExceeded(RuntimeError):
    def __init__(self, spent: int, limit: int):
        super().__init__(f"work budget exceeded: {spent} > {limit}")
        self.spent = spent
        self.limit = limit


_limit: int | None = None
_spent: int = 0


def set_limit(limit: int | None) -> None:
    """Install a fresh budget (None disables metering)."""
    global _limit, _spent
    _limit = limit
    _spent = 0


def spent() -> int:
    return _spent


def tick(n: int = 1) -> None:
    global _spent
    _spent += n
    if _limit is not None and _spent > _limit:
        raise BudgetExceeded(_spent, _limit)

"""Trade routing and execution toolkit for CFMM networks with hooks."""

__version__ = "0.1.0"

from .cfmm import (
    GEOMETRIC_MEAN,
    PRODUCT,
    SUM,
    LimitOrder,
    LiquidityStep,
    Market,
    ModifiedExchangeCurve,
    Trade2,
    compose_with_order,
    forward_exchange,
    limit_order_contains,
    liquidity_step_sequence,
    marginal_rate,
    minkowski_contains,
    modified_forward_exchange,
    solve_breakpoint,
    trading_function,
)

__all__ = [
    "GEOMETRIC_MEAN",
    "PRODUCT",
    "SUM",
    "LimitOrder",
    "LiquidityStep",
    "Market",
    "ModifiedExchangeCurve",
    "Trade2",
    "compose_with_order",
    "forward_exchange",
    "limit_order_contains",
    "liquidity_step_sequence",
    "marginal_rate",
    "minkowski_contains",
    "modified_forward_exchange",
    "solve_breakpoint",
    "trading_function",
    "__version__",
]

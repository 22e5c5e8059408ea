#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for rates and exponents that may be infinite or clamped."""
import math

from pydantic import BaseModel, ConfigDict


class Rate(BaseModel):
    """A rate or exponent in nats per copy.

    Attributes:
        value: The value; +inf when the underlying trace vanishes or a supremum diverges.
        clamped: Whether the value was held at a domain boundary instead of being evaluated.
    """

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    value: float
    clamped: bool = False

    @classmethod
    def infinite(cls) -> "Rate":
        """Build the +inf rate.

        Returns:
            A rate holding +inf.
        """
        return cls(value=math.inf)

    @property
    def is_infinite(self) -> bool:
        """Whether the rate is +inf or -inf."""
        return math.isinf(self.value)

    def __float__(self) -> float:
        """Convert to a plain float.

        Returns:
            The value, math.inf when infinite.
        """
        return self.value

"""Exception types shared across horizonkit."""


class HorizonKitError(Exception):
    """Base class for all horizonkit errors."""


class DegenerateProjection(HorizonKitError):
    """Point projects to infinity (on or too close to the principal plane)."""


class VerticalHorizon(HorizonKitError):
    """Horizon line is (numerically) vertical; the (l, r) view is undefined."""


class DegenerateModel(HorizonKitError):
    """SfM model cannot constrain the horizon plane (too few or coplanar cameras)."""


class InsufficientData(HorizonKitError):
    """Fewer samples than a fitting routine requires."""


class DegenerateBins(HorizonKitError):
    """Quantile bin edges collapsed (duplicate-heavy training data)."""


class MissingExternalGrid(HorizonKitError):
    """No stored probability grid for the requested image id."""


class MissingPrediction(HorizonKitError):
    """Prediction file lacks entries for one or more labeled images."""

    def __init__(self, missing_ids):
        self.missing_ids = list(missing_ids)
        super().__init__(f"missing predictions for {len(self.missing_ids)} image(s): "
                         + ", ".join(self.missing_ids[:5])
                         + ("..." if len(self.missing_ids) > 5 else ""))


class DegenerateDistribution(HorizonKitError):
    """Every aggregation candidate scored the probability floor in all subwindows."""


class SfmFormatError(HorizonKitError):
    """Malformed SfM camera file (message carries file and line number)."""

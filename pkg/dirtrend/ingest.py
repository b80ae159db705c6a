"""
CSV input and output of directional time series.

Schema: header ``time,theta,phi`` (radians, colatitude/longitude) or, with
degrees=True, ``time,lat,lon`` (degrees latitude/longitude).
"""

import logging
import math
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import CsvParseError
from .geometry import directions_from_polar, latlon_to_polar, polar_from_directions, polar_to_latlon, wrap_longitude
from .model import DirectionData

logger = logging.getLogger(__name__)

RADIAN_COLUMNS = ('time', 'theta', 'phi')
DEGREE_COLUMNS = ('time', 'lat', 'lon')
FLOAT_FORMAT = '%.12g'


def _columns(degrees: bool) -> Tuple[str, str, str]:
    return DEGREE_COLUMNS if degrees else RADIAN_COLUMNS


def _numeric_column(frame: pd.DataFrame, name: str) -> np.ndarray:
    raw = frame[name]
    values = pd.to_numeric(raw, errors='coerce')
    bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        index = int(np.flatnonzero(bad.to_numpy())[0])
        text = str(raw.iloc[index]).strip()
        if not pd.isna(values.iloc[index]):
            reason = f"non-finite value {text!r}"
        elif text == '':
            reason = 'missing value'
        else:
            reason = f"cannot parse {text!r}"
        # header is line 1
        raise CsvParseError(f"column {name!r}: {reason}", line=index + 2)
    return values.to_numpy(dtype=float)


def read_direction_table(path: Union[str, Path], degrees: bool = False) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Parse a direction CSV into (times, theta, phi) arrays in file order.

    Raises:
        FileNotFoundError: missing file
        CsvParseError: missing columns, unparsable or out-of-range values
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise CsvParseError(f"{path} is empty", line=1) from e
    except pd.errors.ParserError as e:
        raise CsvParseError(f"{path}: {e}") from e
    frame.columns = [str(c).strip().lower() for c in frame.columns]

    columns = _columns(degrees)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        hint = ' (use --degrees for time,lat,lon files)' if not degrees and {'lat', 'lon'} <= set(frame.columns) else ''
        raise CsvParseError(f"header must contain {','.join(columns)}; missing {missing}{hint}", line=1)
    if frame.empty:
        raise CsvParseError(f"{path} has a header but no rows", line=2)

    times, first, second = (_numeric_column(frame, c) for c in columns)
    if degrees:
        out_of_range = np.flatnonzero((first < -90.0) | (first > 90.0))
        if out_of_range.size:
            raise CsvParseError(f"latitude {first[out_of_range[0]]!r} outside [-90, 90]",
                                line=int(out_of_range[0]) + 2)
        theta, phi = latlon_to_polar(first, second)
    else:
        out_of_range = np.flatnonzero((first < 0.0) | (first > math.pi))
        if out_of_range.size:
            raise CsvParseError(f"colatitude {first[out_of_range[0]]!r} outside [0, pi]",
                                line=int(out_of_range[0]) + 2)
        theta = first
        phi = wrap_longitude(second)
    return times, theta, phi


def ingest_csv(path: Union[str, Path], degrees: bool = False) -> DirectionData:
    """
    Load directional observations sorted by time.

    Duplicate time stamps are kept in file order and logged as a warning.
    """
    times, theta, phi = read_direction_table(path, degrees)
    order = np.argsort(times, kind='stable')
    times = times[order]
    duplicates = np.flatnonzero(np.diff(times) == 0)
    if duplicates.size:
        logger.warning("%s: %d duplicate time stamps (first at time %g); file order kept",
                       path, duplicates.size, times[duplicates[0]])
    if np.any(order != np.arange(order.size)):
        logger.info("%s: rows sorted by time", path)
    Y = directions_from_polar(theta[order], phi[order])
    logger.info("loaded %d directions from %s", Y.shape[0], path)
    return DirectionData(Y, times)


def direction_frame(times: np.ndarray, X: np.ndarray, degrees: bool = False) -> pd.DataFrame:
    """Rows of X as a (time, angle, angle) frame in the ingest schema."""
    theta, phi = polar_from_directions(X)
    if degrees:
        first, second = polar_to_latlon(theta, phi)
    else:
        first, second = theta, phi
    return pd.DataFrame(dict(zip(_columns(degrees), (np.asarray(times, dtype=float), first, second))))


def write_direction_csv(
    path: Union[str, Path],
    times: np.ndarray,
    X: np.ndarray,
    degrees: bool = False
) -> Path:
    """Write unit rows of X with their times; angles at 12 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    direction_frame(times, X, degrees).to_csv(path, index=False, float_format=FLOAT_FORMAT,
                                              lineterminator='\n')
    return path


def export_data(path: Union[str, Path], data: DirectionData, degrees: bool = False) -> Path:
    times = data.times if data.times is not None else np.arange(1, data.p + 1, dtype=float)
    return write_direction_csv(path, times, data.Y, degrees)


def load_optional(path: Optional[Union[str, Path]], degrees: bool = False) -> Optional[DirectionData]:
    return None if path is None else ingest_csv(path, degrees)

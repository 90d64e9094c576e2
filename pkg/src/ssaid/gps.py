"""Reader for GPS daily-solution files and simple two-column CSVs.

The daily-solution format is whitespace- or comma-delimited with six numeric
columns per row: decimal year, year, day of year, and north/east/up ground
movement in millimetres.  Lines starting with '#' and blank lines are
skipped.  Day gaps are tolerated and reported; nothing is interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSeries

COMPONENTS = ("north", "east", "up")

DAYS_PER_YEAR = 365.25


class GpsParseError(ValueError):
    """Malformed or inconsistent GPS record file."""


@dataclass(frozen=True)
class GpsRecordFile:
    """Parsed daily-solution series for one station."""

    station_id: str
    decimal_year: np.ndarray
    year: np.ndarray
    day_of_year: np.ndarray
    north_mm: np.ndarray
    east_mm: np.ndarray
    up_mm: np.ndarray
    gaps: tuple[tuple[int, float], ...]  # (row index, gap before it in days)

    def __len__(self) -> int:
        return self.decimal_year.size

    def component(self, name: str) -> TimeSeries:
        """Extract one movement component.

        dt is the median sample spacing in days and the origin is the first
        sample's time in days (decimal_year * 365.25), so index-to-time
        mapping stays in one unit.
        """
        if name not in COMPONENTS:
            raise ValueError(f"component must be one of {COMPONENTS}, got {name!r}")
        values = getattr(self, f"{name}_mm")
        if len(self) > 1:
            spacing = np.diff(self.decimal_year) * DAYS_PER_YEAR
            dt = float(np.median(spacing))
        else:
            dt = 1.0
        return TimeSeries(
            values.copy(), dt=dt, origin=float(self.decimal_year[0]) * DAYS_PER_YEAR
        )


def _data_lines(text: str) -> list[tuple[int, list[str]]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append((lineno, stripped.replace(",", " ").split()))
    return out


def parse_gps(data: bytes | str, station_id: str = "") -> GpsRecordFile:
    """Parse a daily-solution file; raises GpsParseError with the line number
    of the first malformed or out-of-order row."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    rows = _data_lines(text)
    if not rows:
        raise GpsParseError("empty GPS file (no data rows)")

    parsed = []
    for lineno, fields in rows:
        if len(fields) < 6:
            raise GpsParseError(
                f"line {lineno}: expected 6 columns, got {len(fields)}"
            )
        try:
            vals = [float(v) for v in fields[:6]]
        except ValueError as exc:
            raise GpsParseError(f"line {lineno}: non-numeric field ({exc})") from None
        doy = int(vals[2])
        if not (1 <= doy <= 366):
            raise GpsParseError(f"line {lineno}: day_of_year {doy} outside [1, 366]")
        parsed.append((lineno, vals))

    dec = np.array([v[0] for _, v in parsed])
    for i in range(1, dec.size):
        if dec[i] <= dec[i - 1]:
            raise GpsParseError(
                f"line {parsed[i][0]}: decimal_year {dec[i]} not increasing"
            )

    gaps: list[tuple[int, float]] = []
    if dec.size > 1:
        spacing = np.diff(dec) * DAYS_PER_YEAR
        typical = float(np.median(spacing))
        for i, gap in enumerate(spacing, start=1):
            if gap > 1.5 * typical:
                gaps.append((i, float(gap)))

    return GpsRecordFile(
        station_id=station_id,
        decimal_year=dec,
        year=np.array([int(v[1]) for _, v in parsed]),
        day_of_year=np.array([int(v[2]) for _, v in parsed]),
        north_mm=np.array([v[3] for _, v in parsed]),
        east_mm=np.array([v[4] for _, v in parsed]),
        up_mm=np.array([v[5] for _, v in parsed]),
        gaps=tuple(gaps),
    )


def write_gps(rec: GpsRecordFile) -> str:
    """Serialize back to the daily-solution text format."""
    lines = [f"# station {rec.station_id}"] if rec.station_id else []
    for i in range(len(rec)):
        lines.append(
            "%.10g %d %d %.10g %.10g %.10g"
            % (
                rec.decimal_year[i],
                rec.year[i],
                rec.day_of_year[i],
                rec.north_mm[i],
                rec.east_mm[i],
                rec.up_mm[i],
            )
        )
    return "\n".join(lines) + "\n"


def read_series(path: str, component: str = "east") -> tuple[TimeSeries, str, list[str]]:
    """Load a series from a file, auto-detecting the format by column count:
    6+ columns is the GPS daily-solution format, 2 columns is 't,value' CSV
    (an optional non-numeric header row is skipped).  Returns the series,
    the component label it carries, and human-readable notes (sampling gaps
    are tolerated, never filled, but always reported)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    rows = _data_lines(text)
    if not rows:
        raise GpsParseError(f"{path}: empty input file")

    def _is_number(tok: str) -> bool:
        try:
            float(tok)
            return True
        except ValueError:
            return False

    first_data = rows[0][1]
    if not all(_is_number(tok) for tok in first_data):
        rows = rows[1:]  # header row
        if not rows:
            raise GpsParseError(f"{path}: no data rows after header")
        first_data = rows[0][1]

    if len(first_data) >= 6:
        station = path.rsplit("/", 1)[-1].split(".")[0]
        rec = parse_gps(text, station_id=station)
        notes = []
        if rec.gaps:
            largest = max(g for _, g in rec.gaps)
            notes.append(
                "%d sampling gap(s) in the input, largest %.1f days; "
                "nothing interpolated" % (len(rec.gaps), largest)
            )
        return rec.component(component), component, notes

    if len(first_data) == 2:
        ts, xs = [], []
        for lineno, fields in rows:
            if len(fields) != 2:
                raise GpsParseError(f"line {lineno}: expected 2 columns")
            try:
                ts.append(float(fields[0]))
                xs.append(float(fields[1]))
            except ValueError:
                raise GpsParseError(f"line {lineno}: non-numeric field") from None
        t = np.array(ts)
        notes: list[str] = []
        if t.size > 1:
            steps = np.diff(t)
            if np.any(steps <= 0):
                bad = int(np.argmax(steps <= 0)) + 1
                raise GpsParseError(f"row {bad + 1}: time not increasing")
            dt = float(np.median(steps))
            n_gaps = int(np.sum(steps > 1.5 * dt))
            if n_gaps:
                notes.append(
                    "%d sampling gap(s) in the input, largest %.3g time units"
                    % (n_gaps, float(steps.max()))
                )
        else:
            dt = 1.0
        return TimeSeries(np.array(xs), dt=dt, origin=float(t[0])), "value", notes

    raise GpsParseError(
        f"{path}: unrecognized format ({len(first_data)} columns; expected 2 or >= 6)"
    )

"""Module for separated-variables spectra of sums of one-dimensional periodic operators"""
import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from octant_spectra import ValidationError
from octant_spectra.half_solid import HalfSolidSpectrum
from octant_spectra.jacobi_core import Interval, SpectralBands
from octant_spectra.states import GapState, StateKind

logger = logging.getLogger(__name__)

MIN_ISOLATION_DISTANCE = 3.0


class ComponentSource(Enum):
    """Enum for the one-dimensional model behind a component"""

    HALF_LINE: str = "half_line"
    HALF_SOLID: str = "half_solid"


class Domain(Enum):
    """Enum for the lattice domain of a separated-variables operator"""

    OCTANT: str = "octant"
    HALF_PLANE: str = "half_plane"
    PLANE: str = "plane"


@dataclass(frozen=True)
class ComponentSpectrum:
    """
    Dataclass for the spectrum of one axis.

    `eigenvalues[n - 1]` is the eigenvalue in gap n (None when the gap holds
    none). A half-solid component keeps its vacuum band separately, and its
    eigenvalues above the periodic spectrum in `extra_eigenvalues`.
    """

    bands: tuple[Interval, ...]
    eigenvalues: tuple[Optional[float], ...]
    source: ComponentSource = ComponentSource.HALF_LINE
    vacuum: Optional[Interval] = None
    extra_eigenvalues: tuple[float, ...] = ()

    @property
    def p(self) -> int:
        return len(self.bands)

    @property
    def top(self) -> float:
        return self.bands[-1].upper

    def normalized(self, gamma: float) -> "ComponentSpectrum":
        return ComponentSpectrum(
            bands=tuple(band.scaled(1.0 / gamma) for band in self.bands),
            eigenvalues=tuple(None if e is None else e / gamma for e in self.eigenvalues),
            source=self.source,
            vacuum=None if self.vacuum is None else self.vacuum.scaled(1.0 / gamma),
            extra_eigenvalues=tuple(e / gamma for e in self.extra_eigenvalues),
        )

    def translated(self, offset: float) -> "ComponentSpectrum":
        return ComponentSpectrum(
            bands=tuple(band.translated(offset) for band in self.bands),
            eigenvalues=tuple(None if e is None else e + offset for e in self.eigenvalues),
            source=self.source,
            vacuum=None if self.vacuum is None else self.vacuum.translated(offset),
            extra_eigenvalues=tuple(e + offset for e in self.extra_eigenvalues),
        )


def component_from_half_line(
    bands: SpectralBands, states: Sequence[GapState]
) -> ComponentSpectrum:
    """Half-line component: bands plus the gap states that are eigenvalues"""
    by_gap = {state.n: state for state in states}
    eigenvalues = tuple(
        by_gap[n].mu
        if n in by_gap and by_gap[n].kind is StateKind.EIGENVALUE
        else None
        for n in range(1, bands.p)
    )
    return ComponentSpectrum(bands=bands.bands, eigenvalues=eigenvalues)


def component_from_half_solid(spectrum: HalfSolidSpectrum) -> ComponentSpectrum:
    """Half-solid component: periodic bands, gap eigenvalues and the vacuum band"""
    return ComponentSpectrum(
        bands=spectrum.bands[:-1],
        eigenvalues=spectrum.eigenvalues,
        source=ComponentSource.HALF_SOLID,
        vacuum=spectrum.vacuum_band,
        extra_eigenvalues=spectrum.top_gap_eigenvalues,
    )


@dataclass(frozen=True)
class Cluster:
    """Dataclass for the sums labeled n with m eigenvalue axes, in normalized units"""

    m: int
    n: int
    intervals: tuple[Interval, ...]

    @property
    def hull(self) -> Interval:
        return Interval(lower=self.intervals[0].lower, upper=self.intervals[-1].upper)

    @property
    def center(self) -> float:
        return self.hull.center


@dataclass(frozen=True)
class PointEigenvalue:
    """Dataclass for a point of the spectrum K_n^e with its multiplicity"""

    n: int
    value: float
    multiplicity: int
    members: tuple[float, ...]


@dataclass(frozen=True)
class IsolationInterval:
    """Dataclass for I_n in normalized units and its scaled copy gamma I_n"""

    n: int
    normalized: Interval
    scaled: Interval
    distance: float
    spectrum_below: bool
    spectrum_above: bool

    @property
    def isolated(self) -> bool:
        return (
            self.distance >= MIN_ISOLATION_DISTANCE
            and self.spectrum_below
            and self.spectrum_above
        )


@dataclass(frozen=True)
class ClusterReport:
    """Dataclass for the assembled spectrum of a d-dimensional sum"""

    d: int
    gamma: float
    clusters: tuple[Cluster, ...]
    point_spectrum: tuple[PointEigenvalue, ...]
    isolation: tuple[IsolationInterval, ...]
    domain: Domain = Domain.OCTANT
    # sums with an eigenvalue above the periodic bands of a half-solid axis
    extra_essential: tuple[Interval, ...] = ()
    extra_points: tuple[float, ...] = ()

    @property
    def e1(self) -> float:
        return 1.0 / (4.0 * self.d)

    def clusters_of_type(self, m: int) -> tuple[Cluster, ...]:
        return tuple(cluster for cluster in self.clusters if cluster.m == m)

    @property
    def clusters0(self) -> tuple[Cluster, ...]:
        return self.clusters_of_type(0)

    @property
    def clusters1(self) -> tuple[Cluster, ...]:
        return self.clusters_of_type(1)

    @property
    def clusters2(self) -> tuple[Cluster, ...]:
        return self.clusters_of_type(2)

    @property
    def essential_spectrum(self) -> tuple[Interval, ...]:
        """Normalized sums with at least one band factor"""
        return _merge(
            itertools.chain(
                (
                    interval
                    for cluster in self.clusters
                    if cluster.m < self.d
                    for interval in cluster.intervals
                ),
                self.extra_essential,
            )
        )

    def point(self, n: int) -> Optional[PointEigenvalue]:
        return next((point for point in self.point_spectrum if point.n == n), None)


@dataclass(frozen=True)
class CountCertificate:
    """Dataclass for the evidence behind an eigenvalue count on an interval"""

    interval: Interval
    distance: float
    spectrum_below: bool
    spectrum_above: bool

    @property
    def certified(self) -> bool:
        return (
            self.distance >= MIN_ISOLATION_DISTANCE
            and self.spectrum_below
            and self.spectrum_above
        )


def _merge(intervals: Iterable[Interval]) -> tuple[Interval, ...]:
    merged: list[Interval] = []
    for interval in sorted(intervals, key=lambda i: (i.lower, i.upper)):
        if merged and interval.lower <= merged[-1].upper:
            last = merged[-1]
            merged[-1] = Interval(lower=last.lower, upper=max(last.upper, interval.upper))
        else:
            merged.append(interval)
    return tuple(merged)


def minkowski_sum(
    first: Sequence[Interval], second: Sequence[Interval]
) -> tuple[Interval, ...]:
    """
    A + B = {x + y : x in A, y in B} for unions of closed intervals.

    :param first: intervals of A
    :param second: intervals of B
    :return: sorted disjoint intervals
    """
    return _merge(
        Interval(lower=a.lower + b.lower, upper=a.upper + b.upper)
        for a in first
        for b in second
    )


def _check_structure(components: Sequence[ComponentSpectrum]) -> None:
    for axis, component in enumerate(components, start=1):
        if len(component.eigenvalues) != component.p - 1:
            message = (
                f"Axis {axis}: {component.p} bands need {component.p - 1} gap slots, "
                f"got {len(component.eigenvalues)}"
            )
            logger.info(message)
            raise StructureError(message)
        for n, value in enumerate(component.eigenvalues, start=1):
            below, above = component.bands[n - 1], component.bands[n]
            if value is None or not below.upper < value < above.lower:
                message = f"Axis {axis}: gap {n} has no eigenvalue inside it (got {value})"
                logger.info(message)
                raise StructureError(message)


def _factors(component: ComponentSpectrum, eigen_axis: bool) -> list[tuple[int, Interval]]:
    """(label, interval) pairs: eigenvalue e_i carries i - 1, band j carries j"""
    if eigen_axis:
        return [
            (n - 1, Interval(lower=value, upper=value))
            for n, value in enumerate(component.eigenvalues, start=1)
        ]
    return list(enumerate(component.bands))


def _build_report(
    d: int,
    components: Sequence[ComponentSpectrum],
    gamma: float,
    domain: Domain,
    window_top: float = np.inf,
    extra_essential: Sequence[Interval] = (),
    extra_points: Sequence[float] = (),
) -> ClusterReport:
    normalized = [component.normalized(gamma) for component in components]
    top = window_top / gamma
    sums: dict[tuple[int, int], list[Interval]] = defaultdict(list)
    points: dict[int, list[float]] = defaultdict(list)

    for m in range(d + 1):
        for eigen_axes in itertools.combinations(range(d), m):
            per_axis = [
                _factors(component, axis in eigen_axes)
                for axis, component in enumerate(normalized)
            ]
            for combination in itertools.product(*per_axis):
                n = sum(label for label, _ in combination)
                lower = sum(interval.lower for _, interval in combination)
                upper = sum(interval.upper for _, interval in combination)
                if lower > top:
                    continue
                if m == d:
                    points[n].append(lower)
                else:
                    sums[(m, n)].append(Interval(lower=lower, upper=upper))

    clusters = tuple(
        Cluster(m=m, n=n, intervals=_merge(intervals))
        for (m, n), intervals in sorted(sums.items())
    )
    point_spectrum = tuple(
        PointEigenvalue(
            n=n,
            value=float(np.mean(members)),
            multiplicity=len(members),
            members=tuple(sorted(members)),
        )
        for n, members in sorted(points.items())
    )

    extra_bands = tuple(
        band.scaled(1.0 / gamma) for band in _merge(extra_essential) if band.lower <= window_top
    )
    extras = tuple(sorted(value / gamma for value in extra_points if value <= window_top))
    essential = _merge(
        itertools.chain(
            (interval.scaled(gamma) for cluster in clusters for interval in cluster.intervals),
            (band.scaled(gamma) for band in extra_bands),
        )
    )
    radius = 1.0 / (8.0 * d)
    isolation = []
    for point in point_spectrum:
        normalized_interval = Interval(lower=point.value - radius, upper=point.value + radius)
        certificate = _certificate(normalized_interval.scaled(gamma), essential)
        isolation.append(
            IsolationInterval(
                n=point.n,
                normalized=normalized_interval,
                scaled=certificate.interval,
                distance=certificate.distance,
                spectrum_below=certificate.spectrum_below,
                spectrum_above=certificate.spectrum_above,
            )
        )
        logger.debug(
            f"K_{point.n}^e={point.value:.6f} x{point.multiplicity}, "
            f"distance {certificate.distance:.3f}"
        )

    return ClusterReport(
        d=d,
        gamma=float(gamma),
        clusters=clusters,
        point_spectrum=point_spectrum,
        isolation=tuple(isolation),
        domain=domain,
        extra_essential=extra_bands,
        extra_points=extras,
    )


def _certificate(interval: Interval, essential: Sequence[Interval]) -> CountCertificate:
    distance = min((interval.distance_to(band) for band in essential), default=np.inf)
    return CountCertificate(
        interval=interval,
        distance=float(distance),
        spectrum_below=any(band.upper < interval.lower for band in essential),
        spectrum_above=any(band.lower > interval.upper for band in essential),
    )


def assemble(
    d: int, components: Sequence[ComponentSpectrum], gamma: float
) -> ClusterReport:
    """
    Clusters, point spectrum and isolation intervals of J_1 + ... + J_d on
    the octant.

    :param d: dimension, 2 or 3
    :param components: one designed half-line spectrum per axis
    :param gamma: normalization scale
    :return: cluster report in normalized units
    """
    if d not in (2, 3) or len(components) != d:
        message = f"Need d in (2, 3) with d components, got d={d}, {len(components)}"
        logger.info(message)
        raise StructureError(message)
    _check_structure(components)
    return _build_report(d, components, gamma, Domain.OCTANT)


def assemble_mixed(
    domain: Domain, components: Sequence[ComponentSpectrum], gamma: float
) -> ClusterReport:
    """
    Cluster report for Z_+ x Z (half-line then half-solid) or Z^2 (two half
    solids), restricted to the window [0, 2 lambda_p^+].

    :param domain: HALF_PLANE or PLANE
    :param components: two components in axis order
    :param gamma: normalization scale
    :return: cluster report of the periodic parts plus the sums that involve
        eigenvalues above the periodic bands
    """
    expected = {
        Domain.HALF_PLANE: (ComponentSource.HALF_LINE, ComponentSource.HALF_SOLID),
        Domain.PLANE: (ComponentSource.HALF_SOLID, ComponentSource.HALF_SOLID),
    }
    if domain not in expected or len(components) != 2:
        message = f"Mixed assembly needs two components on a mixed domain, got {domain}"
        logger.info(message)
        raise StructureError(message)
    sources = tuple(component.source for component in components)
    if sources != expected[domain]:
        message = f"Domain {domain.value} needs components {expected[domain]}, got {sources}"
        logger.info(message)
        raise StructureError(message)
    _check_structure(components)

    window_top = 2.0 * max(component.top for component in components)
    for axis, component in enumerate(components):
        if component.vacuum is None:
            continue
        other_bottom = min(
            other.bands[0].lower for i, other in enumerate(components) if i != axis
        )
        if component.vacuum.lower + other_bottom <= window_top:
            message = (
                f"Vacuum band of axis {axis + 1} reaches {component.vacuum.lower + other_bottom} "
                f"inside the window [0, {window_top}]; raise tau"
            )
            logger.info(message)
            raise WindowError(message)
    extra_essential: list[Interval] = []
    extra_points: list[float] = []
    for axis, component in enumerate(components):
        other = components[1 - axis]
        for extra in component.extra_eigenvalues:
            extra_essential.extend(band.translated(extra) for band in other.bands)
            extra_points.extend(extra + value for value in other.eigenvalues)
            if axis == 0:
                extra_points.extend(extra + value for value in other.extra_eigenvalues)
    if extra_essential:
        logger.info(
            f"Eigenvalues above the periodic bands add {len(extra_essential)} band sums "
            f"and {len(extra_points)} points before restricting to [0, {window_top}]"
        )
    return _build_report(
        2,
        components,
        gamma,
        domain,
        window_top=window_top,
        extra_essential=extra_essential,
        extra_points=extra_points,
    )


def eigenvalues_in_interval(
    report: ClusterReport, interval: Interval, gamma: float
) -> tuple[int, CountCertificate]:
    """
    Number of eigenvalues, with multiplicity, in an interval of raw energies.

    :param report: assembled spectrum
    :param interval: interval in raw units, e.g. an isolation interval
    :param gamma: scale relating raw and normalized units
    :return: count and the certificate of isolation
    """
    essential = tuple(band.scaled(gamma) for band in report.essential_spectrum)
    overlapping = [band for band in essential if band.overlaps(interval)]
    if overlapping:
        message = f"{interval} overlaps the essential spectrum at {overlapping[:3]}"
        logger.info(message)
        raise IntervalOverlapError(message)

    certificate = _certificate(interval, essential)
    members = itertools.chain(
        (member for point in report.point_spectrum for member in point.members),
        report.extra_points,
    )
    count = sum(1 for member in members if interval.contains(gamma * member))
    logger.debug(f"{count} eigenvalues in {interval}; distance {certificate.distance:.3f}")
    return count, certificate


class StructureError(ValidationError):
    """Exception for components lacking the designed band and eigenvalue structure"""


class WindowError(ValidationError):
    """Exception for a vacuum band intruding into the assembly window"""


class IntervalOverlapError(ValidationError):
    """Exception for a counting interval that meets the essential spectrum"""

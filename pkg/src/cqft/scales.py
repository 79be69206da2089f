"""M-adic scale decomposition of stationary covariances on periodic 1-D grids.

A smooth partition of unity in Fourier space cuts a spectral density into
dyadic (more generally M-adic) bands.  Each band yields a circulant kernel on
the grid, a positive-semidefinite covariance in its own right, and Gaussian
samples of every band can be synthesized independently by FFT.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid1D",
    "ScaleSystem",
    "BumpSpec",
    "PartitionGapError",
    "PartitionOfUnity",
    "SlicedCovariance",
    "theta_profile",
    "build_partition",
    "slice_covariance",
    "check_scaled_decay",
    "sample_sliced_field",
    "power_law_density",
    "export_partition_rows",
    "export_slice_rows",
]


class PartitionGapError(ValueError):
    """The bump windows leave a gap (or overshoot) in the partition of unity."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid: `size` points spaced `spacing` apart."""

    size: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.size < 2 or self.size & (self.size - 1):
            raise ValueError(f"grid size must be a power of two, got {self.size}")
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")

    @property
    def length(self):
        return self.size * self.spacing

    @property
    def nyquist(self):
        return math.pi / self.spacing

    def positions(self):
        return np.arange(self.size) * self.spacing

    def sym_lags(self):
        """Signed lag of each grid index, wrapped to (-L/2, L/2]."""
        x = self.positions()
        return np.where(x > self.length / 2, x - self.length, x)

    def frequencies(self):
        """Angular frequencies of the FFT bins (signed)."""
        return 2 * math.pi * np.fft.fftfreq(self.size, d=self.spacing)


@dataclass(frozen=True)
class ScaleSystem:
    """Scale ratio M and the working window of scale indices on a grid.

    Slice j lives on frequencies |xi| ~ M**j; the j_min slice absorbs the
    whole infrared block below it, and j_max plays the role of the
    ultraviolet cutoff.
    """

    M: float = 2.0
    j_min: int = 0
    j_max: int = 8
    grid: Grid1D = field(default_factory=lambda: Grid1D(4096, 1.0 / 512))

    def __post_init__(self):
        if self.M <= 1:
            raise ValueError(f"scale ratio must exceed 1, got M={self.M}")
        if self.j_min > self.j_max:
            raise ValueError(f"j_min={self.j_min} > j_max={self.j_max}")
        if self.grid.nyquist <= self.M ** self.j_max:
            raise ValueError(
                f"Nyquist {self.grid.nyquist:.3g} does not resolve scale "
                f"M^j_max = {self.M ** self.j_max:.3g}"
            )

    @property
    def scales(self):
        return range(self.j_min, self.j_max + 1)


@dataclass(frozen=True)
class BumpSpec:
    """Transition windows of the C-infinity cutoff profile.

    The profile theta(u) equals 1 for |u| <= plateau and 0 for |u| >= cutoff,
    with an exp(-1/t)-smooth transition in between.  chi0 = theta and
    chi1(xi) = theta(xi/M) - theta(xi), supported in [plateau, M*cutoff].
    The chi1_* fields override the window of the *upper* edge of chi1; any
    mismatch with the lower profile breaks the telescoping sum and is
    rejected by build_partition.
    """

    plateau: float | None = None   # defaults to 1/M
    cutoff: float = 1.0
    chi1_plateau: float | None = None
    chi1_cutoff: float | None = None

    def resolved(self, M):
        lo = 1.0 / M if self.plateau is None else self.plateau
        hi = self.cutoff
        up_lo = lo if self.chi1_plateau is None else self.chi1_plateau
        up_hi = hi if self.chi1_cutoff is None else self.chi1_cutoff
        if not (0 < lo < hi):
            raise ValueError(f"bad bump window: plateau={lo}, cutoff={hi}")
        if not (0 < up_lo < up_hi):
            raise ValueError(f"bad chi1 window: plateau={up_lo}, cutoff={up_hi}")
        return lo, hi, up_lo, up_hi


def _smoothstep(t):
    """C-infinity monotone 0 -> 1 on [0, 1], built from exp(-1/t)."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
    return a / (a + b)


def theta_profile(u, lo, hi):
    """Smooth cutoff profile: 1 on [0, lo], 0 beyond hi."""
    u = np.abs(np.asarray(u, dtype=float))
    return 1.0 - _smoothstep((u - lo) / (hi - lo))


_theta = theta_profile


class PartitionOfUnity:
    """chi0 and the rescaled band bumps chi^j, with grid caches per scale."""

    def __init__(self, system, bump=None):
        self.system = system
        self.bump = bump or BumpSpec()
        self._lo, self._hi, self._up_lo, self._up_hi = self.bump.resolved(system.M)
        freqs = np.abs(system.grid.frequencies())
        self._grid_chi = {j: self.chi(j, freqs) for j in system.scales}

    def chi(self, j, xi):
        """Evaluate the scale-j window at (arrays of) frequencies xi.

        The j_min window is the full infrared block theta(M^-j_min xi); bands
        above it are differences of consecutive rescaled profiles.
        """
        sys = self.system
        if not (sys.j_min <= j <= sys.j_max):
            raise ValueError(f"scale {j} outside [{sys.j_min}, {sys.j_max}]")
        xi = np.abs(np.asarray(xi, dtype=float))
        upper = _theta(xi * sys.M ** (-j), self._up_lo, self._up_hi)
        if j == sys.j_min:
            return upper
        lower = _theta(xi * sys.M ** (-(j - 1)), self._lo, self._hi)
        return upper - lower

    def chi_on_grid(self, j):
        return self._grid_chi[j]

    def truncation_window(self, xi):
        """The UV-truncation window at the top scale, evaluated directly."""
        return _theta(np.abs(xi) * self.system.M ** (-self.system.j_max),
                      self._up_lo, self._up_hi)

    def partition_sum(self, xi):
        xi = np.asarray(xi, dtype=float)
        total = np.zeros_like(xi)
        for j in self.system.scales:
            total += self.chi(j, xi)
        return total

    def window_edge(self):
        """Largest |xi| at which the truncated sum is still exactly 1."""
        return self._up_lo * self.system.M ** self.system.j_max

    def residual_on_grid(self):
        freqs = np.abs(self.system.grid.frequencies())
        inside = freqs <= self.window_edge()
        total = np.zeros_like(freqs)
        for j in self.system.scales:
            total += self._grid_chi[j]
        return freqs[inside], np.abs(1.0 - total[inside])


def build_partition(system, bump=None, tol=1e-12):
    """Build and validate the partition of unity on the system's grid.

    Raises PartitionGapError, naming the worst frequency, if the windows do
    not telescope to 1 inside the UV window.
    """
    part = PartitionOfUnity(system, bump)
    xi, resid = part.residual_on_grid()
    if resid.size and resid.max() > tol:
        worst = int(np.argmax(resid))
        raise PartitionGapError(
            f"partition sum deviates from 1 by {resid[worst]:.3e} at "
            f"xi={xi[worst]:.6g} (windows do not telescope)"
        )
    for j in system.scales:
        vals = part.chi_on_grid(j)
        if vals.min() < -tol or vals.max() > 1 + tol:
            raise PartitionGapError(
                f"chi^{j} leaves [0,1]: range [{vals.min():.3e}, {vals.max():.3e}]"
            )
    return part


def power_law_density(exponent):
    """Spectral density |xi|^(-exponent); the xi=0 bin is zeroed downstream."""
    def density(xi):
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(xi == 0, 0.0, np.abs(xi) ** (-exponent))
        return out
    return density


class SlicedCovariance:
    """Direct-space kernels of each spectral band of a stationary covariance."""

    def __init__(self, partition, spectral_density, beta):
        self.partition = partition
        self.system = partition.system
        self.beta = beta
        self.spectral_density = spectral_density
        grid = self.system.grid
        freqs = grid.frequencies()
        dens = np.asarray(spectral_density(np.abs(freqs)), dtype=float)
        dens[0] = 0.0  # infrared rule: zero mode removed, observables use increments
        if not np.all(np.isfinite(dens)):
            raise ValueError("spectral density not finite on the grid away from xi=0")
        if dens.min() < 0:
            raise ValueError("spectral density must be nonnegative")
        self._density_on_grid = dens
        self.slices = {}
        self._slice_spectra = {}
        for j in self.system.scales:
            spec = partition.chi_on_grid(j) * dens
            self._slice_spectra[j] = spec
            self.slices[j] = np.fft.ifft(spec).real / grid.spacing

    def slice_spectrum(self, j):
        return self._slice_spectra[j]

    def kernel(self, j):
        return self.slices[j]

    def variance(self, j):
        return self.slices[j][0]

    def truncated_kernel(self):
        """Kernel of the full UV-truncated covariance, computed directly."""
        grid = self.system.grid
        window = self.partition.truncation_window(grid.frequencies())
        return np.fft.ifft(window * self._density_on_grid).real / grid.spacing

    def telescoping_residual(self):
        total = sum(self.slices.values())
        return np.abs(total - self.truncated_kernel()).max()

    def min_circulant_eigenvalue(self, j):
        return np.fft.fft(self.slices[j]).real.min()


def slice_covariance(partition, spectral_density, beta):
    """Slice a spectral density into per-scale circulant kernels."""
    return SlicedCovariance(partition, spectral_density, beta)


@dataclass
class ScaledDecayReport:
    r: int
    constant: float
    per_scale: dict
    stable: bool


def check_scaled_decay(sliced, r, j_lo=None, j_hi=None, growth_limit=10.0):
    """Fit the smallest C_r with |C^j(x)| <= C_r M^(2 beta j) (1+M^j|x|)^-r.

    Only proper band slices enter (the infrared block is not self-similar).
    The fit fails, with `stable=False`, if the per-scale constants keep
    growing with j, which happens when the bump is too rough for the
    requested decay order r.
    """
    sys = sliced.system
    if r < 0:
        raise ValueError("decay order r must be >= 0")
    lags = np.abs(sys.grid.sym_lags())
    j_lo = sys.j_min + 1 if j_lo is None else j_lo
    j_hi = sys.j_max if j_hi is None else j_hi
    per_scale = {}
    for j in range(j_lo, j_hi + 1):
        env = sys.M ** (2 * sliced.beta * j) * (1 + sys.M ** j * lags) ** (-float(r))
        per_scale[j] = float(np.max(np.abs(sliced.slices[j]) / env))
    values = np.array(list(per_scale.values()))
    stable = bool(values.max() <= growth_limit * np.median(values))
    return ScaledDecayReport(r=r, constant=float(values.max()),
                             per_scale=per_scale, stable=stable)


def _stream(seed, *key):
    """Deterministic disjoint substream for a (seed, key...) pair."""
    parts = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFF for k in key]
    return np.random.default_rng(parts)


def sample_sliced_field(sliced, j, seed, n_samples=1, component=0):
    """Synthesize Gaussian samples of the scale-j band on the periodic grid.

    Returns an array of shape (n_samples, grid.size).  The same (seed, j,
    component) always yields the same samples; distinct scales and components
    use disjoint substreams and are therefore independent.
    """
    sys = sliced.system
    if j not in sliced.slices:
        raise ValueError(f"slice {j} not computed")
    grid = sys.grid
    rng = _stream(seed, component, j - sys.j_min)
    white = rng.standard_normal((n_samples, grid.size))
    amp = np.sqrt(sliced.slice_spectrum(j))
    fields = np.fft.ifft(amp * np.fft.fft(white, axis=-1), axis=-1).real
    # E[psi psi] = ifft(spectrum)/spacing = the slice kernel, so scale by 1/sqrt(h)
    return fields / math.sqrt(grid.spacing)


def export_partition_rows(partition):
    """Rows (j, xi, value) over the positive-frequency grid, for CSV export."""
    freqs = partition.system.grid.frequencies()
    order = np.argsort(freqs)
    pos = freqs[order] >= 0
    xi = freqs[order][pos]
    rows = []
    for j in partition.system.scales:
        vals = partition.chi_on_grid(j)[order][pos]
        rows.extend((j, float(x), float(v)) for x, v in zip(xi, vals))
    return rows


def export_slice_rows(sliced):
    """Rows (j, x, value) of each slice kernel over symmetric lags."""
    lags = sliced.system.grid.sym_lags()
    order = np.argsort(lags)
    rows = []
    for j in sliced.system.scales:
        vals = sliced.slices[j][order]
        rows.extend((j, float(x), float(v)) for x, v in zip(lags[order], vals))
    return rows

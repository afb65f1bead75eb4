"""Command-line entry point ``triparabola``.

Every subcommand prints a JSON report (``schema: 1``) carrying the resolved
configuration and library version. With ``--out DIR`` the report and a CSV of
plot data are also written to ``DIR/<command>.json`` and ``DIR/<command>.csv``.

A ``--config FILE`` of ``key = value`` lines supplies defaults for the
subcommand's options; flags given on the command line win. Exit status is 0
on success, 1 on usage errors and 2 when a checked inequality fails.

Heavy modules are imported inside the commands so that ``--threads`` can cap
BLAS/OpenMP pools before numpy loads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import click

from . import __version__

SCHEMA = 1


# -- config and ranges -------------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_range(text: str) -> list[int]:
    """``"4..10"`` -> ``[4, ..., 10]``; ``"2,5,7"`` -> ``[2, 5, 7]``; ``"3"`` -> ``[3]``."""
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"not an integer range: {text!r}") from None


class _Range(click.ParamType):
    name = "RANGE"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        return parse_range(value)


RANGE = _Range()


def _jsonable(x):
    import numpy as np

    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _emit(ctx: click.Context, result: dict, rows: list[list] | None = None,
          header: list[str] | None = None) -> None:
    params = {k: v for k, v in ctx.params.items()}
    report = {
        "schema": SCHEMA,
        "command": ctx.info_name,
        "version": __version__,
        "config": _jsonable({**params, "threads": ctx.obj.get("threads")}),
        "result": _jsonable(result),
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    click.echo(text, nl=False)
    out = ctx.obj.get("out")
    if out is not None:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{ctx.info_name}.json").write_text(text)
        if rows is not None:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, float) else v for v in _jsonable(r)])
            (d / f"{ctx.info_name}.csv").write_text(buf.getvalue())


# -- masks --------------------------------------------------------------------------------


def _read_pgm(raw: bytes):
    import numpy as np

    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise click.UsageError("only 8-bit PGM masks are supported")
    if magic == b"P5":
        data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    elif magic == b"P2":
        data = np.array(raw[pos:].split(), dtype=np.int64)[: w * h]
    else:
        raise click.UsageError("not a PGM file (expected P2 or P5)")
    if data.size != w * h:
        raise click.UsageError("truncated PGM data")
    return data.reshape(h, w)


def load_mask(path):
    """Read a 0/1 CSV grid or an 8-bit PGM; nonzero means inside.

    File rows run from top (largest ``y``) to bottom and columns are ``x``,
    so the returned array is indexed ``[x, y]``.
    """
    import numpy as np

    p = Path(path)
    raw = p.read_bytes()
    if raw[:2] in (b"P2", b"P5"):
        img = _read_pgm(raw)
    else:
        img = np.loadtxt(p, delimiter=",", ndmin=2)
    if img.shape[0] != img.shape[1]:
        raise click.UsageError(f"mask must be square (got {img.shape[0]}x{img.shape[1]})")
    return (img[::-1].T != 0)


def save_mask_csv(mask, path) -> None:
    import numpy as np

    img = np.asarray(mask, dtype=int).T[::-1]
    np.savetxt(path, img, fmt="%d", delimiter=",")


# -- group -----------------------------------------------------------------------------------


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="key = value file with option defaults.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for JSON/CSV reports.")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
              help="Cap on worker threads (1 = sequential reproduction mode).")
@click.version_option(__version__)
@click.pass_context
def cli(ctx, config_path, out, threads):
    """Numerical laboratory for the triangular Hilbert transform along a parabola."""
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)
    ctx.ensure_object(dict)
    ctx.obj.update(out=out, threads=threads)
    if config_path:
        cfg = read_config(config_path)
        ctx.default_map = {name: cfg for name in cli.commands}


# -- multiplier ------------------------------------------------------------------------------


@cli.command("multiplier-scan")
@click.option("--family", type=click.Choice(["m", "m_plus", "m_L", "m_M", "m_H"]), default="m",
              show_default=True)
@click.option("--grid-log2", type=RANGE, default="4..10", show_default=True,
              help="Dyadic scales lambda = 2^j along the path.")
@click.option("--path", "path_name", type=click.Choice(["stationary", "non_stationary",
                                                         "non_oscillatory", "stationary_interior"]),
              default="stationary", show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.pass_context
def multiplier_scan(ctx, family, grid_log2, path_name, tol):
    """Tabulate a multiplier family along a dyadic path with regime tags."""
    import numpy as np

    from .fitting import fit_decay
    from .multiplier import PATHS, eval_family_array, point_regime

    if not grid_log2 or min(grid_log2) < -20 or max(grid_log2) > 20:
        raise click.BadParameter("grid-log2 must lie in -20..20", param_hint="--grid-log2")
    lam = np.ldexp(1.0, grid_log2)
    pts = np.array([PATHS[path_name](float(l)) for l in lam])
    v, err = eval_family_array(family, pts[:, 0], pts[:, 1], None, tol)
    rows = [[int(j), float(x), float(y), float(z.real), float(z.imag), float(abs(z)), float(e),
             point_regime(x, y).value] for j, (x, y), z, e in zip(grid_log2, pts, v, err)]
    res = {"rows": rows}
    mags = np.abs(v)
    if len(lam) >= 5 and np.all(mags > np.maximum(err, 1e-14)):
        res["fit"] = fit_decay(lam, mags).as_dict()
    _emit(ctx, res, rows, ["log2_lambda", "xi", "eta", "re", "im", "abs", "err", "regime"])


# -- operators -------------------------------------------------------------------------------


@cli.command("operator-apply")
@click.option("--op", type=click.Choice(["Hj", "m_L", "m_M", "m_H", "hl-maximal", "shifted-maximal"]),
              default="Hj", show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Field binary container; default is a random band-limited field.")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None)
@click.option("--n", type=int, default=64, show_default=True)
@click.option("--period", type=float, default=1.0, show_default=True)
@click.option("--bandwidth", type=float, default=8.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--j", "j_range", type=RANGE, default="0", show_default=True)
@click.option("--axis", type=click.IntRange(1, 2), default=1, show_default=True)
@click.option("--sigma", type=float, default=0.0, show_default=True)
@click.pass_context
def operator_apply(ctx, op, input_path, output_path, n, period, bandwidth, seed, j_range, axis, sigma):
    """Apply a singular or maximal operator to a field."""
    import numpy as np

    from .grid import (Field2D, FreqSupportSpec, load_binary, lp_norm, make_grid,
                       random_band_limited, save_binary)
    from .operators import apply_family, apply_Hj, hl_maximal, shifted_maximal

    if input_path:
        f = load_binary(input_path)
    else:
        g = make_grid(n, n, period, period)
        f = random_band_limited(g, FreqSupportSpec("both", "ball", bandwidth), seed)
    if op == "Hj":
        if len(j_range) != 1:
            raise click.BadParameter("Hj takes a single j", param_hint="--j")
        out = apply_Hj(f, j_range[0])
    elif op in ("m_L", "m_M", "m_H"):
        out = apply_family(f, op, j_range)
    elif op == "hl-maximal":
        out = Field2D(f.grid, hl_maximal(f, axis).astype(complex))
    else:
        out = Field2D(f.grid, np.asarray(shifted_maximal(f, axis, sigma), dtype=complex))
    if output_path:
        save_binary(out, output_path)
    res = {"input_l2": lp_norm(f, 2), "output_l2": lp_norm(out, 2),
           "output_sup": float(np.max(np.abs(out.samples))), "grid": list(f.grid.shape)}
    rows = [[float(x), float(a)] for x, a in zip(f.grid.x, np.abs(out.samples[:, 0]))]
    _emit(ctx, res, rows, ["x", "abs_out_y0"])


# -- decay and smoothing ------------------------------------------------------------------------


def _fit_rows(fit):
    return [[a, b] for a, b in fit.samples]


@cli.command("decay-fit")
@click.option("--kind", type=click.Choice(["highfreq", "cheap", "stationary", "non_stationary"]),
              default="highfreq", show_default=True)
@click.option("--k", "k_range", type=RANGE, default="2..8", show_default=True,
              help="k (highfreq) or log2 lambda (other kinds).")
@click.option("--trials", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def decay_fit(ctx, kind, k_range, trials, seed):
    """Fit a decay exponent for one of the regime experiments."""
    import numpy as np

    from .multiplier import regime_decay_fit
    from .smoothing_lab import cheap_smoothing_check, highfreq_decay_fit

    if kind == "highfreq":
        fit = highfreq_decay_fit(k_range, trials, seed)
    elif kind == "cheap":
        fit = cheap_smoothing_check(np.ldexp(1.0, k_range), trials, seed)
    else:
        fit = regime_decay_fit(kind, tuple(np.ldexp(1.0, k_range)))
    _emit(ctx, {"fit": fit.as_dict(), "sigma": fit.sigma}, _fit_rows(fit), ["log2_scale", "log2_value"])


@cli.command("smoothing-fit")
@click.option("--lambda-log2", "lam_range", type=RANGE, default="4..9", show_default=True)
@click.option("--which-arg", type=click.IntRange(1, 2), default=1, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--f3-one", is_flag=True)
@click.option("--wrong-axis", is_flag=True)
@click.option("--modulated", is_flag=True)
@click.pass_context
def smoothing_fit_cmd(ctx, lam_range, which_arg, trials, seed, f3_one, wrong_axis, modulated):
    """Fit the trilinear smoothing exponent for one localized argument."""
    import numpy as np

    from .smoothing_lab import smoothing_fit

    fit = smoothing_fit(np.ldexp(1.0, lam_range), which_arg, trials, seed,
                        f3_one=f3_one, wrong_axis=wrong_axis, modulated=modulated)
    _emit(ctx, {"fit": fit.as_dict(), "sigma": fit.sigma}, _fit_rows(fit), ["log2_lambda", "log2_median"])


# -- pruning ---------------------------------------------------------------------------------


@cli.command("prune")
@click.option("--n", type=int, default=64, show_default=True)
@click.option("--bandwidth", type=int, default=20, show_default=True)
@click.option("--R", "R", type=float, default=4.0, show_default=True)
@click.option("--rho", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def prune_cmd(ctx, n, bandwidth, R, rho, seed):
    """Split a random 1-D field into sharp and flat parts."""
    from .pruning import autocorr_identity_defect, envelope_smoothness, flat_energy_check, prune, random_field1d

    f = random_field1d(n, bandwidth, seed)
    res = prune(f, R, rho)
    if len(res.selected) > 2 / rho:
        raise AssertionError(f"{len(res.selected)} windows exceed 2/rho = {2 / rho:g}")
    out = {
        "selected": res.selected, "heavy": res.heavy, "window_bound": 2 / rho,
        "flat_ratio": flat_energy_check(res), "envelope_ratios": envelope_smoothness(res),
        "autocorr_defect": autocorr_identity_defect(f, R),
        "sharp_norm": res.sharp.norm2(), "flat_norm": res.flat.norm2(),
    }
    rows = [[float(k), float(abs(a)), float(abs(b))]
            for k, a, b in zip(f.freqs, res.sharp.coeffs, res.flat.coeffs)]
    _emit(ctx, out, rows, ["freq", "abs_sharp", "abs_flat"])


# -- sublevel ----------------------------------------------------------------------------------


@cli.command("sublevel-mc")
@click.option("--alpha", type=float, default=None, help="Constant alpha (else a random table).")
@click.option("--beta", type=float, default=None, help="Constant beta (else a random table).")
@click.option("--cells", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--epsilon", type=float, default=0.1, show_default=True)
@click.option("--t-lo", type=float, default=0.1, show_default=True)
@click.option("--samples", type=click.IntRange(min=10_000), default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sweep", is_flag=True, help="Fit the epsilon exponent over 2^-2..2^-7.")
@click.pass_context
def sublevel_mc(ctx, alpha, beta, cells, epsilon, t_lo, samples, seed, sweep):
    """Monte-Carlo measure of the sublevel set, with a Wilson interval."""
    from .sublevel import make_instance, random_instance, sublevel_exponent_fit, sublevel_measure_mc

    if sweep:
        fit = sublevel_exponent_fit(cells, None, samples, seed)
        _emit(ctx, {"fit": fit.as_dict()}, _fit_rows(fit), ["log2_epsilon", "log2_measure"])
        return
    if (alpha is None) != (beta is None):
        raise click.UsageError("give both --alpha and --beta, or neither")
    inst = (make_instance(alpha, beta, epsilon, t_lo) if alpha is not None
            else random_instance(cells, epsilon, seed, t_lo))
    est, ci = sublevel_measure_mc(inst, samples, seed)
    _emit(ctx, {"estimate": est, "ci95": list(ci)}, [[est, ci[0], ci[1]]], ["estimate", "ci_low", "ci_high"])


@cli.command("refine")
@click.option("--resolution", type=click.IntRange(min=4), default=128, show_default=True)
@click.option("--density", type=float, default=None,
              help="Random voxel set of this density (default: sublevel set of a random instance).")
@click.option("--epsilon", type=float, default=0.25, show_default=True)
@click.option("--cells", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--t-lo", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def refine_cmd(ctx, resolution, density, epsilon, cells, t_lo, seed):
    """Run the refinement cascade and check its measure inequalities."""
    import numpy as np

    from .sublevel import random_instance, refine, triple_system_defect, voxelize_instance

    r = resolution
    inst = None
    if density is not None:
        if not 0 < density <= 1:
            raise click.BadParameter("density must lie in (0, 1]", param_hint="--density")
        E = np.random.default_rng(seed).random((r, r, r)) < density
    else:
        inst = random_instance(cells, epsilon, seed, t_lo)
        E = voxelize_instance(inst, r)
    c = refine(E, t_lo)
    checks = c.bound_check()
    out = {"measures": c.measures(), "checks": checks, "zbar": list(c.zbar)}
    if inst is not None:
        out["triple_defect"] = triple_system_defect(c, inst, max_points=20_000, seed=seed)
    failed = [k for k, ok in checks.items() if not ok]
    _emit(ctx, out, [[k, v] for k, v in c.measures().items()], ["set", "measure"])
    if failed:
        raise AssertionError("cascade inequality failed: " + ", ".join(failed))


# -- roth ---------------------------------------------------------------------------------------


@cli.command("roth-find")
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--epsilon", type=float, required=True)
@click.option("--M", "M", type=int, default=4, show_default=True)
@click.pass_context
def roth_find(ctx, mask_path, epsilon, M):
    """Find a verified corner (x, y), (x + t, y), (x, y + t^2) in a mask."""
    from .roth import CornerConfig, find_corner

    S = load_mask(mask_path)
    res = find_corner(S, epsilon, CornerConfig(epsilon, M=M))
    _emit(ctx, res.as_dict(), [list(res.corner)], ["x", "y", "t"])


@cli.command("corner-count")
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k", type=int, default=None, help="Bump scale; omit for the plain integral only.")
@click.option("--kL", "kL", type=int, default=None)
@click.option("--kH", "kH", type=int, default=None)
@click.pass_context
def corner_count(ctx, mask_path, k, kL, kH):
    """Corner integral of a mask and, with --k/--kL/--kH, its three-term split."""
    from .roth import corner_integral, split_I123

    f = load_mask(mask_path).astype(float)
    out = {"I": corner_integral(f)}
    rows = [["I", out["I"]]]
    if k is not None:
        if kL is None or kH is None:
            raise click.UsageError("--k needs --kL and --kH")
        sp = split_I123(f, k, kL, kH)
        out["split"] = sp
        rows += [[name, sp[name]] for name in ("I1", "I2", "I3")]
    _emit(ctx, out, rows, ["term", "value"])


# -- entry point ------------------------------------------------------------------------------------


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="triparabola", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except AssertionError as e:
        click.echo(f"check failed: {e}", err=True)
        return 2
    except (ValueError, ArithmeticError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every command reads an optional config file (TOML or JSON) whose keys
mirror ``PhysicalConfig`` and ``BoxConfig``::

    alpha = 1.5
    hbar = 1.0
    d_alpha = 1.0
    time_mode = "imaginary"

    [box]
    a = 1.0
    n_modes = 200
    n_images = 40

Flat ``"box.a"`` style keys are accepted too.  Command-line flags override
the file.  Exit status: 0 success, 2 some rows did not converge (flagged
per row), 1 configuration or domain error, 3 failed validation checks.
"""
import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from .errors import DomainError, NonConvergenceError, ParameterError
from .kernels import (
    BoxConfig,
    PhysicalConfig,
    box_eigen,
    box_kernel_images,
    box_kernel_spectral,
    evolve_wavefunction,
    feynman_kernel_1d,
    free_kernel_1d,
    free_kernel_3d,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_CHECKS = 0, 1, 2, 3

KERNEL_COLUMNS = ["x", "t", "re", "im", "abs_err_estimate", "terms_used", "converged", "method"]
BOX_COLUMNS = ["x_b", "x_a", "t", "re", "im", "abs_err_estimate", "terms_used", "converged", "method"]
EVOLVE_COLUMNS = ["x", "t", "re", "im", "abs"]

_PHYSICAL_KEYS = {"alpha", "hbar", "d_alpha", "time_mode"}
_BOX_KEYS = {"a", "n_modes", "n_images"}


class CliError(Exception):
    """Configuration or usage error; reported with exit status 1."""


# ---------------------------------------------------------------------------
# configuration


def _flatten(data):
    flat = {}
    for key, value in data.items():
        if key == "box" and isinstance(value, dict):
            for sub, v in value.items():
                flat[f"box.{sub}"] = v
        else:
            flat[key] = value
    return flat


def load_config(path):
    """Read a TOML or JSON config into a flat dict (``box.*`` keys dotted)."""
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.endswith(".json"):
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise CliError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise CliError("config must be a table of keys")
    flat = _flatten(data)
    for key in flat:
        if key.startswith("box."):
            if key[4:] not in _BOX_KEYS:
                raise CliError(f"unknown config key {key!r}")
        elif key not in _PHYSICAL_KEYS:
            raise CliError(f"unknown config key {key!r}")
    return flat


def _number(flat, key, default, kind=float):
    value = flat.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CliError(f"config key {key!r} must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise CliError(f"config key {key!r} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def physical_config(flat, args):
    alpha = args.alpha if getattr(args, "alpha", None) is not None else _number(flat, "alpha", 1.5)
    time_mode = flat.get("time_mode", "imaginary")
    if args.time_mode is not None:
        time_mode = args.time_mode
    return PhysicalConfig(
        float(alpha), _number(flat, "hbar", 1.0), _number(flat, "d_alpha", 1.0), time_mode
    )


def box_config(flat):
    return BoxConfig(
        _number(flat, "box.a", 1.0),
        _number(flat, "box.n_modes", 200, int),
        _number(flat, "box.n_images", None, int),
    )


def parse_grid(text, name="grid"):
    """``"min:max:steps"`` to an array; ``steps >= 2``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise CliError(f"{name} must look like min:max:steps, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        steps = int(parts[2])
    except ValueError:
        raise CliError(f"{name} must look like min:max:steps, got {text!r}") from None
    if steps < 2:
        raise CliError(f"{name} needs at least 2 steps, got {steps}")
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise CliError(f"{name} needs finite min < max, got {text!r}")
    return np.linspace(lo, hi, steps)


def parse_times(text):
    try:
        times = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"times must be a comma-separated list of numbers, got {text!r}") from None
    if not times:
        raise CliError("at least one time is needed")
    return times


# ---------------------------------------------------------------------------
# output


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, str):
        return value
    v = float(value)
    return v if math.isfinite(v) else str(v)


def render(blocks, columns, fmt):
    """``blocks`` is a list of ``(labels, rows)``; labels become leading columns."""
    if fmt == "json":
        payload = []
        for labels, rows in blocks:
            entry = dict(labels)
            entry["columns"] = columns
            entry["rows"] = [[_json_value(v) for v in row] for row in rows]
            payload.append(entry)
        data = payload[0] if len(payload) == 1 and not blocks[0][0] else payload
        return json.dumps(data, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    label_names = list(blocks[0][0].keys()) if blocks else []
    writer.writerow(label_names + columns)
    for labels, rows in blocks:
        for row in rows:
            writer.writerow([_fmt(v) for v in list(labels.values()) + list(row)])
    return buf.getvalue()


def write_output(text, path):
    """Write to ``path`` atomically (temp file in the same directory, then rename)."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise CliError(f"output directory {parent} does not exist")
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".foxkernel-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# commands


def _kernel_rows(kind, x, times, cfg):
    rows = []
    all_conv = True
    for t in times:
        if kind == "feynman":
            if cfg.alpha != 2.0:
                raise CliError("the feynman kernel needs alpha = 2")
            mass = 1.0 / (2.0 * cfg.d_alpha)
            vals = feynman_kernel_1d(x, t, mass, cfg.hbar, imaginary=cfg.imaginary)
            for xi, v in zip(x, np.atleast_1d(vals)):
                rows.append([xi, t, v.real, v.imag, 0.0, 0, True, "closed-form"])
            continue
        fn = free_kernel_3d if kind == "free-3d" else free_kernel_1d
        res = fn(x, t, cfg, full_output=True)
        for xi, v, e, n, c, m in zip(x, res.value, res.abs_error_estimate, res.terms_used, res.converged, res.method):
            rows.append([xi, t, v.real, v.imag, e, n, bool(c), m])
        all_conv &= bool(np.all(res.converged))
    return rows, all_conv


def run_kernel(args, flat):
    cfg = physical_config(flat, args)
    x = parse_grid(args.grid or "-5:5:21")
    times = parse_times(args.times)
    rows, ok = _kernel_rows(args.kind, x, times, cfg)
    write_output(render([({}, rows)], KERNEL_COLUMNS, args.format), args.out)
    return EXIT_OK if ok else EXIT_PARTIAL


def run_sweep(args, flat):
    x = parse_grid(args.grid or "-5:5:21")
    times = parse_times(args.times)
    try:
        alphas = [float(v) for v in args.alphas.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"alphas must be a comma-separated list, got {args.alphas!r}") from None
    blocks = []
    ok = True
    for alpha in alphas:
        args.alpha = alpha
        cfg = physical_config(flat, args)
        rows, conv = _kernel_rows(args.kind, x, times, cfg)
        blocks.append(({"alpha": alpha}, rows))
        ok &= conv
    write_output(render(blocks, KERNEL_COLUMNS, args.format), args.out)
    return EXIT_OK if ok else EXIT_PARTIAL


def run_box(args, flat):
    cfg = physical_config(flat, args)
    box = box_config(flat)
    x_b = parse_grid(args.grid) if args.grid else np.linspace(-box.a, box.a, 21)
    times = parse_times(args.times)
    fn = box_kernel_images if args.method == "images" else box_kernel_spectral
    rows = []
    ok = True
    for t in times:
        res = fn(x_b, np.full_like(x_b, args.x_a), t, box, cfg, full_output=True)
        for xb, v, e, n, c in zip(x_b, res.value, res.abs_error_estimate, res.terms_used, res.converged):
            rows.append([xb, args.x_a, t, v.real, v.imag, e, n, bool(c), args.method])
        ok &= bool(np.all(res.converged))
    write_output(render([({}, rows)], BOX_COLUMNS, args.format), args.out)
    return EXIT_OK if ok else EXIT_PARTIAL


def _initial_state(text, grid, box, cfg):
    kind, _, rest = text.partition(":")
    try:
        values = [float(v) for v in rest.split(":") if v]
    except ValueError:
        raise CliError(f"bad initial state {text!r}") from None
    if kind == "box":
        n = int(values[0]) if values else 1
        return box_eigen(n, box, cfg)[1](grid)
    if kind == "gaussian":
        x0, width, p0 = (values + [0.0, 0.5, 0.0][len(values):])[:3]
        if not width > 0:
            raise CliError("gaussian width must be positive")
        psi = np.exp(-((grid - x0) ** 2) / (4 * width**2) + 1j * p0 * grid / cfg.hbar)
        return psi / (2 * np.pi * width**2) ** 0.25
    raise CliError(f"initial state must be box:N or gaussian:x0:width[:p0], got {text!r}")


def run_evolve(args, flat):
    cfg = physical_config(flat, args)
    box = box_config(flat)
    # A uniform grid with fewer than 2 * n_modes intervals aliases the high modes onto the low ones.
    grid = parse_grid(args.grid) if args.grid else np.linspace(-box.a, box.a, 2 * box.n_modes + 1)
    psi0 = _initial_state(args.state, grid, box, cfg)
    rows = []
    for t in parse_times(args.times):
        psi = evolve_wavefunction(psi0, grid, t, args.kernel, cfg, box=box)
        for xi, v in zip(grid, psi):
            rows.append([xi, t, v.real, v.imag, abs(v)])
    write_output(render([({}, rows)], EVOLVE_COLUMNS, args.format), args.out)
    return EXIT_OK


def run_validate(args, flat):
    from .validation import CHECKS, run_checks

    # Validate the configuration even though each check fixes its own alpha.
    cfg = physical_config(flat, args)
    names = [n for n in args.checks.split(",") if n] if args.checks else list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise CliError(f"unknown checks: {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    d_alpha = cfg.d_alpha if "d_alpha" in flat else None
    results = run_checks(names, hbar=cfg.hbar, d_alpha=d_alpha, seed=args.seed)
    for r in results:
        print(r.summary(), file=sys.stderr)
    report = {
        "seed": args.seed,
        "passed": all(r.passed for r in results),
        "checks": [{k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results],
    }
    write_output(json.dumps(report, indent=1, default=_json_value) + "\n", args.out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECKS
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


VALUE_FLAGS = ("--grid", "--times", "--alpha", "--alphas", "--x-a")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file with alpha, hbar, d_alpha, time_mode and box.* keys")
    common.add_argument("--out", help="output file (default: stdout); written atomically")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--wick", dest="time_mode", action="store_const", const="imaginary",
                      help="imaginary (Euclidean) time; the default")
    mode.add_argument("--real-time", dest="time_mode", action="store_const", const="real",
                      help="real time")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised checks (default 0)")
    common.add_argument("--alpha", type=float, help="Levy index, overrides the config")
    common.add_argument("--grid", help='position grid "min:max:steps" (steps >= 2)')
    common.add_argument("--times", default="1.0", help="comma-separated times (default 1.0)")

    parser = argparse.ArgumentParser(
        prog="foxkernel",
        description="Fractional quantum kernels via Fox H-functions.",
        epilog=(
            "CSV columns: kernel and sweep: " + ",".join(KERNEL_COLUMNS)
            + " (sweep prepends alpha); box: " + ",".join(BOX_COLUMNS)
            + "; evolve: " + ",".join(EVOLVE_COLUMNS)
            + ". Floats carry 17 significant digits. Exit status: 0 ok, 1 config or domain error,"
            " 2 rows that did not converge, 3 failed validation checks."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", parents=[common], help="free kernel on a grid")
    p.add_argument("--kind", choices=("free", "free-3d", "feynman"), default="free")
    p.set_defaults(func=run_kernel)

    p = sub.add_parser("sweep", parents=[common], help="free kernel for several alpha values")
    p.add_argument("--kind", choices=("free", "free-3d", "feynman"), default="free")
    p.add_argument("--alphas", default="1.2,1.5,1.8,2.0")
    p.set_defaults(func=run_sweep)

    p = sub.add_parser("box", parents=[common], help="particle-in-a-box kernel along x_b")
    p.add_argument("--method", choices=("spectral", "images"), default="spectral")
    p.add_argument("--x-a", type=float, default=0.0, dest="x_a")
    p.set_defaults(func=run_box)

    p = sub.add_parser("evolve", parents=[common], help="evolve a wavefunction on a grid")
    p.add_argument("--kernel", choices=("free", "box-spectral", "box-images", "wall"), default="box-spectral")
    p.add_argument("--state", default="box:1", help="box:N or gaussian:x0:width[:p0]")
    p.set_defaults(func=run_evolve)

    p = sub.add_parser("validate", parents=[common], help="run the acceptance checks, JSON report")
    p.add_argument("--checks", help="comma-separated subset of checks")
    p.set_defaults(func=run_validate)
    return parser


def _attach_values(argv):
    # argparse reads "--grid -5:5:21" as two options; glue such values on.
    out = []
    for arg in argv:
        if out and out[-1] in VALUE_FLAGS and arg.startswith("-") and len(arg) > 1 and not arg[1].isalpha():
            out[-1] = f"{out[-1]}={arg}"
        else:
            out.append(arg)
    return out


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(_attach_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        flat = load_config(args.config)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args, flat)
    except ParameterError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"foxkernel: configuration error{key}: {exc}", file=sys.stderr)
    except (CliError, DomainError) as exc:
        print(f"foxkernel: {exc}", file=sys.stderr)
    except NonConvergenceError as exc:
        print(f"foxkernel: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

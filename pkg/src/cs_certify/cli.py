"""Command line interface.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import bases, certify, experiment, masks, recovery, sensing
from .errors import ConfigError, CsCertifyError

BASIS_ALIASES = {
    "dft": "fourier",
    "wht": "walsh_hadamard",
    "db4": "daubechies_wavelet",
    "mura": "mura_circulant",
    "eye": "identity",
}

MASK_ALIASES = {
    "random": "uniform_random",
    "density": "density_varied",
    "downsample": "down_sample",
}


def _basis_kind(name):
    return bases.BasisKind(BASIS_ALIASES.get(name, name))


def _mask_kind(name):
    return masks.MaskKind(MASK_ALIASES.get(name, name))


def _parse_size(text):
    try:
        m, n = text.lower().split("x")
        return int(m), int(n)
    except ValueError:
        raise click.BadParameter(f"expected MxN, got {text!r}")


def _load_matrix(path):
    rows = []
    for line in Path(path).read_text().strip().splitlines():
        if line:
            rows.append([float(v) for v in line.split(",")])
    return np.array(rows)


def _save_matrix(A, path):
    with open(path, "w") as fh:
        for row in np.atleast_2d(A):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@click.group()
def main():
    """Sensing-matrix construction, certification and experiments."""


@main.group()
def mask():
    """Sub-sampling masks."""


@mask.command("gen")
@click.option("--kind", required=True)
@click.option("--size", required=True, help="grid as MxN, e.g. 32x32")
@click.option("--ratio", type=float, default=None)
@click.option("--lines", type=int, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--alpha", type=float, default=3.0)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def mask_gen(kind, size, ratio, lines, stride, alpha, seed, out):
    """Generate a mask and write it as JSON (or binary for .bin)."""
    m, n = _parse_size(size)
    params = {}
    if ratio is not None:
        params["ratio"] = ratio
        params["alpha"] = alpha
    if lines is not None:
        params["lines"] = lines
    if stride is not None:
        params["stride"] = stride
    msk = masks.generate_mask(_mask_kind(kind), m, n, params, seed=seed)
    masks.save_mask(msk, out)
    click.echo(f"wrote {out}: |Omega|={msk.size} "
               f"ratio={float(masks.mask_ratio(msk)):.4f}")


@main.group()
def basis():
    """Sampling dictionaries and sparsifiers."""


@basis.command("gen")
@click.option("--kind", required=True)
@click.option("--n", required=True, type=int)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def basis_gen(kind, n, seed, out):
    """Generate a basis and write it as CSV."""
    b = bases.generate_basis(_basis_kind(kind), n, seed=seed)
    bases.basis_to_csv(b, out)
    click.echo(f"wrote {out}: {b.kind.value} {n}x{n} "
               f"({'orthonormal' if b.orthonormal else 'general'})")


@main.group()
def sensing_cmd():
    """Sensing-system assembly."""


main.add_command(sensing_cmd, name="sensing")


@sensing_cmd.command("build")
@click.option("--mask", "mask_path", required=True, type=click.Path(exists=True))
@click.option("--phi", required=True, help="sampling basis kind (both modes)")
@click.option("--phi2", default=None, help="mode-2 sampling basis override")
@click.option("--psi", required=True, help="sparsifier kind")
@click.option("--seed", type=int, default=None, help="seed for random bases")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--provenance", "prov_out", default=None,
              type=click.Path(dir_okay=False))
def sensing_build(mask_path, phi, phi2, psi, seed, out, prov_out):
    """Assemble the sensing matrix for a stored mask."""
    msk = masks.load_mask(mask_path)
    psi_b = recovery.generate_sparsifier(_basis_kind(psi), msk.rows)
    kind1 = _basis_kind(phi)
    if kind1 is bases.BasisKind.MURA_CIRCULANT and msk.rows == msk.cols:
        op = bases.mura_operator(msk.rows).matrix()
        system = sensing.build_sensing_operator(
            msk, op, psi_b, label=f"mura_conv:{msk.rows}")
    else:
        phi1_b = bases.generate_basis(kind1, msk.rows, seed=seed)
        kind2 = _basis_kind(phi2) if phi2 else kind1
        phi2_b = (phi1_b if (phi2 is None and msk.cols == msk.rows)
                  else bases.generate_basis(kind2, msk.cols, seed=seed))
        system = sensing.build_sensing(msk, phi1_b, phi2_b, psi_b)
    _save_matrix(system.A, out)
    if prov_out:
        Path(prov_out).write_text(
            json.dumps(system.provenance, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {out}: A is {system.A.shape[0]}x{system.A.shape[1]}")


@main.command("certify")
@click.option("--matrix", "matrix_path", required=True,
              type=click.Path(exists=True))
@click.option("--method", type=click.Choice(["sdp", "exact", "coherence"]),
              default="sdp")
@click.option("--tol", type=float, default=1e-6)
@click.option("--max-iter", type=int, default=50_000)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def certify_cmd(matrix_path, method, tol, max_iter, out):
    """Certify a stored sensing matrix."""
    A = _load_matrix(matrix_path)
    if method == "sdp":
        cert = certify.ssp_sdp_lower_bound(
            A, certify.SdpOptions(tol=tol, max_iter=max_iter))
    elif method == "exact":
        cert = certify.certificate_exact_small(A)
    else:
        cert = certify.certificate_coherence(A)
    Path(out).write_text(cert.to_json() + "\n")
    click.echo(f"wrote {out}: delta_sq={cert.delta_sq:.6g} k_max={cert.k_max} "
               f"[{cert.status}]")


@main.command("recover")
@click.option("--matrix", "matrix_path", required=True,
              type=click.Path(exists=True))
@click.option("--measurements", required=True, type=click.Path(exists=True))
@click.option("--solver", type=click.Choice(["admm", "lp"]), default="admm")
@click.option("--tol", type=float, default=1e-9)
@click.option("--max-iter", type=int, default=20_000)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def recover_cmd(matrix_path, measurements, solver, tol, max_iter, out):
    """Decode measurements by Basis Pursuit."""
    A = _load_matrix(matrix_path)
    y = _load_matrix(measurements).ravel()
    if solver == "lp":
        result = recovery.bp_lp_reference(A, y)
    else:
        opts = recovery.BpOptions(conv_tol=tol, max_iter=max_iter)
        result = recovery.bp_solve_report(A, y, opts)
    _save_matrix(result.x.reshape(-1, 1), out)
    click.echo(f"wrote {out}: l1={result.objective:.6g} "
               f"residual={result.residual:.3e}")


@main.command("experiment")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--jobs", type=int, default=1)
def experiment_cmd(config_path, out_dir, jobs):
    """Run a configured experiment; emits CSVs plus a manifest."""
    try:
        code = experiment.run_experiment(config_path, out_dir, jobs=jobs)
    except ConfigError as exc:
        for path, msg in exc.diagnostics:
            click.echo(f"config error at {path}: {msg}", err=True)
        sys.exit(2)
    if code != 0:
        click.echo("experiment failed; partial artifacts retained", err=True)
    sys.exit(code)


@main.command("validate")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
def validate_cmd(config_path):
    """Validate a configuration file; prints one diagnostic per line."""
    doc = json.loads(Path(config_path).read_text())
    diags = experiment.validate_config(doc)
    for path, msg in diags:
        click.echo(f"{path}: {msg}")
    if diags:
        sys.exit(2)
    click.echo("ok")


def run():
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(1)
    except SystemExit:
        raise
    except CsCertifyError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    run()

"""Entry point behind scripts/plot."""

import click

from .render import FIGURE_KINDS, FigureInputError, FigureSpec, render


@click.command()
@click.argument("kind", type=click.Choice(FIGURE_KINDS))
@click.option(
    "--in", "in_dir", required=True,
    type=click.Path(exists=True, file_okay=False),
    help="Experiment output directory (searched recursively where it applies).",
)
@click.option(
    "--out", "out_path", required=True, type=click.Path(dir_okay=False),
    help="Output image path (SVG).",
)
def main(kind, in_dir, out_path):
    """Render KIND from experiment outputs under --in to --out."""
    try:
        path = render(FigureSpec(kind, in_dir, out_path))
    except FigureInputError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()

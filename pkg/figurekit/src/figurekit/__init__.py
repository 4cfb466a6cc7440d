"""Figure rendering for pairtrade CSV outputs.

This package consumes only the delimited files the ``pairtrade`` command
writes (series, summary, exponent, conditional-probability and washout
CSVs); it contains no simulation logic of its own.  Rendering is read-only
over its inputs and deterministic: the same input directory always yields
the same image bytes.
"""

from .figures import FIGURE_IDS, FigureInputError, RenderResult, render

__all__ = ["FIGURE_IDS", "FigureInputError", "RenderResult", "render"]

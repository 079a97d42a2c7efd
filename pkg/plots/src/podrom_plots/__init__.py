"""Figure rendering for podrom CSV artifacts.

Strictly a CSV consumer: nothing numerical is recomputed here, so the solver
package remains the single source of truth for every plotted quantity.
"""

from .render import FigureSpec, InputError, render

__all__ = ["FigureSpec", "InputError", "render"]

__version__ = "0.1.0"

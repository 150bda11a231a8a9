"""Hall algebras, Hall modules and cohomological Hall algebras computed from
2-Segal simplicial groupoids, in exact arithmetic."""

__version__ = "0.1.0"

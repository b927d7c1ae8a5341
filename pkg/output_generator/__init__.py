"""Writers for CSV tables, gnuplot scripts and text reports."""

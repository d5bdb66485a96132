"""Low-frequency stabilized RC-circuit and electroquasistatic FE systems."""

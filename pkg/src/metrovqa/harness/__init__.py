"""Dataset construction, ablation evaluation, reporting and the command line."""

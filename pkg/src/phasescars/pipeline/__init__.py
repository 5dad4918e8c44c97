"""Pipeline package: one orchestrator per CLI subcommand."""

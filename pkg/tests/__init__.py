"""
onbuy Test Suite
================

Test package for onbuy.

Test Files:
- test_stream.py: Universes, order models and inspection sessions
- test_purchase_core.py: Threshold tables, constants and k-purchase runs
- test_graph_kernel.py: Union-find, matching, Hamilton search and validators
- test_strategies.py: Strategy engine, targets, adversaries and end-to-end runs
- test_harness.py: Trials, summaries, bounds and reports
- test_cli.py: Subcommands and exit codes
- test_logging.py: Logger setup and component log output
"""

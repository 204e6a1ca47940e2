"""Data module: trial logs, counts, reference data and the audit ledger."""

"""Experiment harness: test-field families, pipelines, reports, and the CLI."""

from .families import (
    block_quadratic_field,
    generate_field,
    kinked_base_field,
    quadratic_plus_cosine_field,
    random_block_quadratic,
    regularize_j,
    schur_complement,
    zero_field,
)
from .contact import ContactQuadratic, build_contact_quadratic
from .pipeline import ExperimentConfig, ExperimentReport, verify_minimum_principle
from .cli import main, run_cli

__all__ = [
    "ContactQuadratic",
    "ExperimentConfig",
    "ExperimentReport",
    "block_quadratic_field",
    "build_contact_quadratic",
    "generate_field",
    "kinked_base_field",
    "main",
    "quadratic_plus_cosine_field",
    "random_block_quadratic",
    "regularize_j",
    "run_cli",
    "schur_complement",
    "verify_minimum_principle",
    "zero_field",
]

"""Tests for the fctl package."""

"""Tests for the ofdm_phy package."""

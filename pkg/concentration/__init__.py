#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Entanglement concentration rates and exact finite-size performance from Schmidt spectra."""

"""Spectra of Sturmian Hamiltonians: band hierarchies and Moran pre-dimensions."""

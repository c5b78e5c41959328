"""Photon scattering off two interacting emitters in a one-dimensional waveguide."""

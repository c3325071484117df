"""Toolkit for predicting passive chip component shift during reflow soldering.

Pipeline: synthetic assembly-data generation -> 48-feature extraction ->
cleaning and correlation-based feature filtering -> three regression
learners (linear epsilon-SVR, feedforward network, random forest) ->
k-fold cross-validation reporting with figures.
"""

__version__ = "0.1.0"

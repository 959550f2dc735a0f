"""
fcreg: functional regression with cointegrated, error-contaminated regressors

Modules:
    fgrid     grids, functions, operators and their spectra
    densities kernel density estimation and the CLR transform
    acovfpca  autocovariance operators and the nonstationary/stationary split
    regress   slope estimation and plug-in inference
    vrtest    variance-ratio test for the trend dimension
    simlab    simulation design and Monte Carlo tables
    cli       command-line surface
"""

__version__ = "0.1.0"

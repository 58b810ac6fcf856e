"""
Service layer for the SPARC toolkit

One module per concern: core mappings, power allocation, design operators,
AMP decoding, state evolution, the LDPC outer code, simulation and jobs.
"""

"""MSE and edge-aware training losses with analytic gradients"""

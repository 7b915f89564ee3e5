# Results store

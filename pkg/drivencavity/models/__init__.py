# Schema models

# wptcc scripts package

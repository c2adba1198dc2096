# package

